#include "ptrag/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "ptrag/prompts.hpp"

namespace ptrag {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu <= 0.0 || nv <= 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

Embedding section_vector(const PaperTree& tree, std::size_t node) {
  Embedding mean;
  std::size_t n = 0;
  for (auto i : tree.section_scope(node)) {
    const auto& e = tree.leaves[i].raw_embedding;
    if (!e || e->empty()) continue;
    if (mean.empty()) mean.assign(e->size(), 0.0);
    if (e->size() != mean.size()) throw std::invalid_argument("section_vector: inconsistent embedding dimensions");
    for (std::size_t d = 0; d < e->size(); ++d) mean[d] += (*e)[d];
    ++n;
  }
  for (double& x : mean) x /= static_cast<double>(n);
  return mean;
}

SectionScore score_section(std::string_view query, std::span<const double> query_embedding, const PaperTree& tree,
                           std::size_t section, TextGenerator* semantic, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("score_section: alpha must lie in [0, 1]");
  SectionScore s;
  s.section = section;
  const auto& node = tree.outline.nodes.at(section);
  Embedding vec = section_vector(tree, section);
  if (vec.empty()) {
    spdlog::warn("section '{}' has no embedded leaves; relevance set to 0", node.title);
    return s;
  }
  s.embedding = query_embedding.empty() ? 0.0 : cosine(query_embedding, vec);

  std::optional<double> f;
  if (semantic) {
    try {
      f = parse_unit_score(semantic->generate(section_alignment_prompt(query, node.title,
                                                                       tree.outline.title_path(section))));
      if (!f) spdlog::warn("section alignment for '{}': unparseable reply, using embedding similarity", node.title);
    } catch (const BackendError& e) {
      spdlog::warn("section alignment for '{}' failed ({}); using embedding similarity", node.title, e.what());
    }
  }
  if (f) {
    s.semantic = *f;
    s.fused = blend(alpha, s.semantic, s.embedding);
  } else {
    s.fallback = true;
    s.fused = s.embedding;
  }
  return s;
}

ScoredSegment score_segment(std::span<const double> query_embedding, const LeafSegment& leaf, double beta) {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("score_segment: beta must lie in [0, 1]");
  ScoredSegment s;
  s.leaf = leaf.order_index;
  if (leaf.raw_embedding && !query_embedding.empty()) s.raw_similarity = cosine(query_embedding, *leaf.raw_embedding);
  if (leaf.summary_embedding && !query_embedding.empty()) {
    s.summary_similarity = cosine(query_embedding, *leaf.summary_embedding);
    s.score = blend(beta, s.raw_similarity, s.summary_similarity);
  } else {
    spdlog::warn("leaf {} has no summary embedding; scoring the raw channel only", leaf.id);
    s.score = s.raw_similarity;
  }
  return s;
}

std::vector<ScoredSegment> rerank(std::string_view query, std::vector<ScoredSegment> candidates, std::size_t k,
                                  Reranker* reranker, const PaperTree& tree) {
  k = std::min(k, candidates.size());
  if (!reranker || k == 0) return candidates;

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });
  order.resize(k);

  std::vector<std::string> texts;
  texts.reserve(k);
  for (auto idx : order) texts.push_back(tree.leaves.at(candidates[idx].leaf).raw_text);
  std::vector<double> raw;
  try {
    raw = reranker->score(query, texts);
    if (raw.size() != k) throw BackendError("reranker returned " + std::to_string(raw.size()) + " scores");
  } catch (const BackendError& e) {
    spdlog::warn("reranker failed ({}); keeping fused scores", e.what());
    return candidates;
  }

  double lo = candidates[order.back()].score;
  double hi = candidates[order.front()].score;
  auto [rmin_it, rmax_it] = std::minmax_element(raw.begin(), raw.end());
  double rmin = *rmin_it;
  double rmax = *rmax_it;
  for (std::size_t j = 0; j < k; ++j) {
    auto& c = candidates[order[j]];
    // A constant reranker carries no ordering information.
    if (rmax > rmin) c.score = lo + (raw[j] - rmin) / (rmax - rmin) * (hi - lo);
    c.reranked = true;
  }
  return candidates;
}

}  // namespace ptrag
