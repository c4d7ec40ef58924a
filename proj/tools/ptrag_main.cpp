#include "ptrag/cli.hpp"

int main(int argc, char** argv) { return ptrag::run_cli(argc, argv); }
