#pragma once
// The PaperTree index: the inferred outline with each section's body split
// into bounded leaf segments, every leaf carrying its hierarchical path, a
// chained summary and cached embeddings for both channels.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ptrag/backends.hpp"
#include "ptrag/outline.hpp"
#include "ptrag/text.hpp"

namespace ptrag {

struct LeafSegment {
  std::string id;
  std::string raw_text;
  std::string summary;
  std::vector<std::string> path;  // titles from the document title down to the owning section
  std::size_t token_cost = 0;
  std::size_t order_index = 0;
  std::size_t section = 0;  // owning outline node
  bool over_cap = false;    // a single sentence longer than the segment cap
  bool summary_fallback = false;
  std::optional<Embedding> raw_embedding;
  std::optional<Embedding> summary_embedding;

  bool operator==(const LeafSegment&) const = default;
};

struct LeafRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool operator==(const LeafRange&) const = default;
};

struct PaperTree {
  OutlineTree outline;
  std::vector<LeafSegment> leaves;  // global document order
  std::string doc_title;
  std::vector<LeafRange> section_index;  // per outline node: its own leaves

  /// Units that compete in section selection: every depth-1 section, plus the
  /// root when it owns leaves of its own (text before the first section, or a
  /// document without headings).
  std::vector<std::size_t> selectable_sections() const;
  /// Leaves owned by `node` and all of its descendants, in document order.
  std::vector<std::size_t> subtree_leaves(std::size_t node) const;
  /// Leaves a selectable section covers: its whole subtree, except the root,
  /// which covers only the leaves it owns directly.
  std::vector<std::size_t> section_scope(std::size_t node) const;
  /// Number of non-root outline nodes, or 1 for a heading-less document.
  std::size_t section_count() const;

  bool operator==(const PaperTree&) const = default;
};

/// Rebuilds `section_index` from the leaves' owning sections. Throws
/// std::invalid_argument if some section's leaves are not contiguous.
std::vector<LeafRange> index_sections(const OutlineTree& outline, const std::vector<LeafSegment>& leaves);

struct RawSegment {
  std::string text;
  std::size_t token_cost = 0;
  bool over_cap = false;

  bool operator==(const RawSegment&) const = default;
};

/// Packs whole paragraphs, list items and fenced blocks into segments of at
/// most `max_tokens`. A block that alone exceeds the cap is split at sentence
/// ends; a single sentence over the cap becomes its own flagged segment.
/// Segments are verbatim slices of `body`.
std::vector<RawSegment> segment_section(std::string_view body, std::size_t max_tokens, const TokenCounter& counter);

struct SummaryResult {
  std::string text;
  bool fallback = false;
};

/// Structure-anchored summary of one segment. Falls back to the segment's
/// first two sentences when the backend fails or returns nothing.
SummaryResult summarize_segment(std::string_view doc_title, const std::vector<std::string>& path,
                                std::string_view segment, std::string_view previous_summary, TextGenerator& backend,
                                std::size_t max_tokens = 128, const TokenCounter& counter = whitespace_counter());

struct IndexConfig {
  std::size_t segment_cap = 512;
  std::size_t summary_cap = 128;
  int max_in_flight = 4;
  OutlineOptions outline;
  TokenCounter counter = whitespace_counter();
};

/// Raised for unrecoverable build problems; the message names the stage.
class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

PaperTree build_index(std::string_view markdown, const IndexConfig& config, const Backends& backends);

/// Reads the file and builds the index; I/O problems raise BuildError.
PaperTree build_index_from_file(const std::filesystem::path& input, const IndexConfig& config,
                                const Backends& backends);

/// Body text of one outline node (its own lines only, demoted headings kept
/// as plain text).
std::string section_body(const OutlineTree& outline, std::size_t node, const std::vector<std::string_view>& lines);

// ---------------------------------------------------------------------------
// Persistence

inline constexpr std::string_view kIndexVersion = "1";

class IndexFormatError : public std::runtime_error {
 public:
  enum class Kind { Corrupt, Version };
  IndexFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string serialize_index(const PaperTree& tree);
PaperTree parse_index(std::string_view text);

void save_index(const PaperTree& tree, const std::filesystem::path& location);
PaperTree load_index(const std::filesystem::path& location);

}  // namespace ptrag
