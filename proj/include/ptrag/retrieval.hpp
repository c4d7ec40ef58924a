#pragma once
// Path-guided retrieval. Sections are ranked first; inside the kept sections
// every section node that owns leaves defines a root-to-leaf path, paths are
// ranked by relevance density, and leaves of the best paths are admitted by
// score per token until the budget is spent. The context is emitted in
// document order.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptrag/backends.hpp"
#include "ptrag/config.hpp"
#include "ptrag/scoring.hpp"
#include "ptrag/tree.hpp"

namespace ptrag {

struct PathCandidate {
  std::vector<std::size_t> nodes;   // outline nodes, root first
  std::vector<std::size_t> leaves;  // member leaf order indices, ascending
  double density = 0.0;             // sum of score / cost over members
  std::size_t cost = 0;

  bool operator==(const PathCandidate&) const = default;
};

struct LeafValue {
  double score = 0.0;
  std::size_t cost = 0;
};

/// Score and cost per leaf order index.
using LeafValues = std::map<std::size_t, LeafValue>;

struct ContextBlock {
  std::size_t leaf = 0;
  std::string path;  // "Title / Section / Subsection"
  std::string summary;
  std::string raw;
};

struct RetrievalContext {
  std::vector<std::size_t> selected;  // ascending order index
  std::vector<PathCandidate> paths;   // paths contributing at least one leaf
  std::vector<ContextBlock> blocks;   // filled by attach_blocks
  std::size_t total_cost = 0;
  std::size_t budget = 0;
};

/// Top `count` sections by fused score, ties in document order. Throws
/// std::invalid_argument for a tree without sections or count < 1.
std::vector<SectionScore> select_sections(std::string_view query, std::span<const double> query_embedding,
                                          const PaperTree& tree, TextGenerator* semantic, double alpha,
                                          std::size_t count);

/// One path per node under each selected section that owns leaves.
std::vector<PathCandidate> enumerate_paths(const PaperTree& tree, std::span<const std::size_t> sections,
                                           const LeafValues& values);

/// Keeps the `max_paths` densest paths and admits their leaves in decreasing
/// score per token (ties by document order), skipping leaves that no longer
/// fit. If the single best-scoring feasible leaf beats that whole selection
/// it is returned alone instead. Leaves with negative score are never
/// admitted.
RetrievalContext select_under_budget(std::vector<PathCandidate> paths, const LeafValues& values, std::size_t budget,
                                     std::size_t max_paths);

/// Fills ctx.blocks from the tree.
void attach_blocks(RetrievalContext& ctx, const PaperTree& tree);

/// Prompt text: a "> " path header whenever the path changes, then
/// "[summary] ..." and the raw segment, closed by a "[source: <leaf id>]"
/// marker.
std::string assemble_context(const RetrievalContext& ctx, const PaperTree& tree);

struct RetrievalResult {
  RetrievalContext context;
  std::vector<SectionScore> sections;
  std::vector<ScoredSegment> segments;  // every scored leaf in scope
  std::vector<double> query_embedding;
};

/// Section selection, dual-channel scoring, optional reranking, path ranking
/// and budgeted selection for one query.
RetrievalResult retrieve(std::string_view query, const PaperTree& tree, const RetrievalConfig& config,
                         const Backends& backends);

/// Query embedding; empty (all similarities 0) if the embedder fails.
Embedding embed_query(std::string_view query, Embedder& embedder);

}  // namespace ptrag
