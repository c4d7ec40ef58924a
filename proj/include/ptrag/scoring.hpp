#pragma once
// Relevance scores: section-level fusion of a language-model alignment score
// with embedding similarity, segment-level fusion of the raw and summary
// channels, and optional cross-encoder rescoring.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ptrag/backends.hpp"
#include "ptrag/tree.hpp"

namespace ptrag {

/// Cosine similarity clamped to [-1, 1]. A zero vector on either side gives 0.
/// Throws std::invalid_argument on a dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

/// weight * a + (1 - weight) * b
inline double blend(double weight, double a, double b) { return weight * a + (1.0 - weight) * b; }

struct SectionScore {
  std::size_t section = 0;  // outline node
  double semantic = 0.0;    // language-model alignment, [0, 1]
  double embedding = 0.0;   // cosine against the section vector, [-1, 1]
  double fused = 0.0;
  /// The alignment backend failed; `fused` is the embedding score alone.
  bool fallback = false;
};

struct ScoredSegment {
  std::size_t leaf = 0;  // order index
  double raw_similarity = 0.0;
  double summary_similarity = 0.0;
  double score = 0.0;
  bool reranked = false;

  bool operator==(const ScoredSegment&) const = default;
};

/// Mean raw-channel embedding over the section's scope (see
/// PaperTree::section_scope); empty if none of
/// them carries an embedding.
Embedding section_vector(const PaperTree& tree, std::size_t node);

/// Fuses the alignment score with the embedding score using `alpha`. A null
/// or failing `semantic` backend falls back to the embedding score alone.
SectionScore score_section(std::string_view query, std::span<const double> query_embedding, const PaperTree& tree,
                           std::size_t section, TextGenerator* semantic, double alpha);

/// Fuses raw and summary similarities with `beta`. Without a summary
/// embedding the raw similarity is used alone.
ScoredSegment score_segment(std::span<const double> query_embedding, const LeafSegment& leaf, double beta);

/// Rescores the top-k candidates by score with the reranker. The reranker's
/// scores are min-max mapped into the range spanned by those candidates'
/// current scores. Order of the returned list equals the input order. A null
/// or failing reranker, or k = 0, returns the input unchanged.
std::vector<ScoredSegment> rerank(std::string_view query, std::vector<ScoredSegment> candidates, std::size_t k,
                                  Reranker* reranker, const PaperTree& tree);

}  // namespace ptrag
