#pragma once
// The `ptrag` command-line tool as a library entry point, so tests can drive
// it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace ptrag {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kDegenerate = 1;  // empty or degenerate input
inline constexpr int kIoOrConfig = 2;
}  // namespace exit_code

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace ptrag
