#pragma once
// Section outline inference for Markdown papers.
//
// Every `#` line is a heading candidate. Adjacent candidate pairs are labelled
// by a language model with one of four relations; low-confidence labels are
// replaced by a rule ladder, and a single reconciliation pass turns the label
// sequence into a well-formed rooted tree.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptrag/backends.hpp"

namespace ptrag {

struct HeadingCandidate {
  std::string text;          // heading line without the leading hashes
  int hash_depth = 1;        // number of leading '#'
  std::size_t line_index = 0;
  double confidence = 1.0;   // set by classification

  bool operator==(const HeadingCandidate&) const = default;
};

enum class Relation { Child = 0, Sibling = 1, AncestorDescendant = 2, NotAHeading = 3 };

std::string_view relation_name(Relation r);

struct RelationLabel {
  std::array<double, 4> probabilities{0.25, 0.25, 0.25, 0.25};
  Relation selected = Relation::Child;
  /// Probability of the selected class; 0 when the backend reply was unusable.
  double confidence = 0.0;

  /// Argmax with ties broken Child > Sibling > AncestorDescendant > NotAHeading.
  static RelationLabel from_probabilities(const std::array<double, 4>& p);
  /// One-hot label with confidence 1.
  static RelationLabel certain(Relation r);
  /// Backend failure: uniform distribution, confidence 0.
  static RelationLabel failed();
};

struct OutlineNode {
  std::string id;
  std::string title;
  int depth = 0;
  std::size_t line_begin = 0;  // heading line
  std::size_t line_end = 0;    // one past the last body line
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;

  bool operator==(const OutlineNode&) const = default;
};

/// Nodes are stored in document (pre-)order; nodes[0] is the root.
struct OutlineTree {
  std::vector<OutlineNode> nodes;
  /// Line indices of candidates rejected as non-headings; their text stays in
  /// the body of the enclosing section.
  std::vector<std::size_t> demoted_lines;
  /// True when the input had no heading and the root was synthesized.
  bool synthetic_root = false;

  const OutlineNode& root() const { return nodes.front(); }
  /// Titles root→node inclusive.
  std::vector<std::string> title_path(std::size_t node) const;
  /// Node ids root→node inclusive.
  std::vector<std::size_t> node_path(std::size_t node) const;

  bool operator==(const OutlineTree&) const = default;
};

/// Human-readable violations of the tree invariants (single root, depth =
/// parent depth + 1, strictly increasing heading lines in pre-order); empty
/// when valid.
std::vector<std::string> validate_outline(const OutlineTree& tree);

enum class OutlineFallback {
  Rules,  // conventional names, numbering prefixes, clamped hash depth
  Flat,   // title at depth 0, every other heading at depth 1
};

struct OutlineOptions {
  double confidence_threshold = 0.6;
  std::size_t context_chars = 200;
  int max_in_flight = 4;
  OutlineFallback fallback = OutlineFallback::Rules;
};

/// Candidates in source order. Lines inside ``` fences are skipped, as are
/// lines whose text is empty once the hashes are removed.
std::vector<HeadingCandidate> extract_heading_candidates(std::string_view markdown);

/// Dotted numbering prefix depth: "3.2.1 Details" -> 3, "A.1 Proofs" -> 2,
/// "Introduction" -> 0.
int numbering_depth(std::string_view title);

/// True for conventional top-level section names (case-insensitive, numbering
/// and trailing punctuation ignored).
bool is_conventional_section(std::string_view title);

/// Depth assigned by the rule ladder. `open_depth` is the depth of the most
/// recently placed heading (0 when only the title is open).
int rule_fallback_level(const HeadingCandidate& candidate, int open_depth);

struct PairContext {
  std::string first_excerpt;
  std::string second_excerpt;
};

/// Asks the backend for the relation between two adjacent candidates and
/// records the selected probability in `next.confidence`. Never throws on
/// backend trouble; the result then has confidence 0.
RelationLabel classify_adjacent_pair(const HeadingCandidate& prev, HeadingCandidate& next,
                                     const PairContext& context, TextGenerator& backend);

/// Builds the outline. `labels[i]` relates candidates[i] and candidates[i+1];
/// labels whose confidence is below the threshold are replaced by the
/// configured fallback. `line_count` is the number of source lines. With no
/// candidates a root titled "Document" spans the whole input.
OutlineTree reconcile_hierarchy(const std::vector<HeadingCandidate>& candidates,
                                const std::vector<RelationLabel>& labels, std::size_t line_count,
                                const OutlineOptions& options = {});

struct OutlineResult {
  OutlineTree tree;
  std::vector<HeadingCandidate> candidates;
  std::vector<RelationLabel> labels;
  std::size_t fallback_pairs = 0;
};

/// Extraction, concurrent pairwise classification and reconciliation.
OutlineResult infer_outline(std::string_view markdown, TextGenerator& backend, const OutlineOptions& options = {});

}  // namespace ptrag
