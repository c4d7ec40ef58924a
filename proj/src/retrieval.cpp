#include "ptrag/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace ptrag {

Embedding embed_query(std::string_view query, Embedder& embedder) {
  try {
    auto v = embedder.embed({std::string(query)});
    if (v.size() == 1) return std::move(v.front());
    spdlog::warn("query embedding: expected one vector, got {}", v.size());
  } catch (const BackendError& e) {
    spdlog::warn("query embedding failed ({}); all similarities are 0", e.what());
  }
  return {};
}

std::vector<SectionScore> select_sections(std::string_view query, std::span<const double> query_embedding,
                                          const PaperTree& tree, TextGenerator* semantic, double alpha,
                                          std::size_t count) {
  if (count < 1) throw std::invalid_argument("select_sections: B must be at least 1");
  auto candidates = tree.selectable_sections();
  if (candidates.empty() || tree.leaves.empty()) throw std::invalid_argument("select_sections: tree has no sections");
  std::vector<SectionScore> scores;
  scores.reserve(candidates.size());
  for (auto s : candidates) scores.push_back(score_section(query, query_embedding, tree, s, semantic, alpha));
  // Candidates are in document order; a stable sort keeps it for ties.
  std::stable_sort(scores.begin(), scores.end(),
                   [](const SectionScore& a, const SectionScore& b) { return a.fused > b.fused; });
  scores.resize(std::min(count, scores.size()));
  return scores;
}

std::vector<PathCandidate> enumerate_paths(const PaperTree& tree, std::span<const std::size_t> sections,
                                           const LeafValues& values) {
  std::vector<PathCandidate> out;
  auto make_path = [&](std::size_t node) {
    const auto& range = tree.section_index.at(node);
    if (range.empty()) return;
    PathCandidate p;
    p.nodes = tree.outline.node_path(node);
    for (auto i = range.begin; i < range.end; ++i) {
      p.leaves.push_back(i);
      auto it = values.find(i);
      double score = it != values.end() ? it->second.score : 0.0;
      std::size_t cost = it != values.end() ? it->second.cost : tree.leaves[i].token_cost;
      p.density += score / static_cast<double>(cost);
      p.cost += cost;
    }
    out.push_back(std::move(p));
  };
  for (auto section : sections) {
    if (section == 0) {
      make_path(0);
      continue;
    }
    // Pre-order walk; node ids increase in document order.
    std::vector<std::size_t> stack{section};
    std::vector<std::size_t> nodes;
    while (!stack.empty()) {
      auto id = stack.back();
      stack.pop_back();
      nodes.push_back(id);
      const auto& ch = tree.outline.nodes.at(id).children;
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    for (auto id : nodes) make_path(id);
  }
  return out;
}

RetrievalContext select_under_budget(std::vector<PathCandidate> paths, const LeafValues& values, std::size_t budget,
                                     std::size_t max_paths) {
  if (max_paths < 1) throw std::invalid_argument("select_under_budget: P must be at least 1");
  RetrievalContext ctx;
  ctx.budget = budget;

  auto first_leaf = [](const PathCandidate& p) { return p.leaves.empty() ? SIZE_MAX : p.leaves.front(); };
  std::stable_sort(paths.begin(), paths.end(), [&](const PathCandidate& a, const PathCandidate& b) {
    if (a.density != b.density) return a.density > b.density;
    return first_leaf(a) < first_leaf(b);
  });
  if (paths.size() > max_paths) paths.resize(max_paths);

  std::set<std::size_t> pool;
  for (const auto& p : paths) pool.insert(p.leaves.begin(), p.leaves.end());
  struct Item {
    std::size_t leaf;
    double score;
    std::size_t cost;
  };
  std::vector<Item> items;
  for (auto leaf : pool) {
    auto it = values.find(leaf);
    if (it == values.end()) throw std::invalid_argument("select_under_budget: no score for leaf " + std::to_string(leaf));
    if (it->second.cost == 0) throw std::invalid_argument("select_under_budget: zero cost for leaf " + std::to_string(leaf));
    items.push_back({leaf, it->second.score, it->second.cost});
  }
  // Marginal relevance per token; equal ratios resolve to document order.
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    double da = a.score / static_cast<double>(a.cost);
    double db = b.score / static_cast<double>(b.cost);
    return da > db;
  });

  std::vector<std::size_t> chosen;
  double objective = 0.0;
  std::size_t remaining = budget;
  std::optional<Item> best_single;
  for (const auto& item : items) {
    if (item.score < 0.0) continue;
    if (item.cost <= budget && (!best_single || item.score > best_single->score)) best_single = item;
    if (item.cost > remaining) continue;
    chosen.push_back(item.leaf);
    objective += item.score;
    remaining -= item.cost;
  }
  if (best_single && best_single->score > objective) {
    chosen = {best_single->leaf};
    remaining = budget - best_single->cost;
  }

  std::sort(chosen.begin(), chosen.end());
  ctx.selected = chosen;
  ctx.total_cost = budget - remaining;
  for (auto& p : paths) {
    bool used = std::any_of(p.leaves.begin(), p.leaves.end(),
                            [&](std::size_t l) { return std::binary_search(chosen.begin(), chosen.end(), l); });
    if (used) ctx.paths.push_back(std::move(p));
  }
  return ctx;
}

void attach_blocks(RetrievalContext& ctx, const PaperTree& tree) {
  ctx.blocks.clear();
  for (auto i : ctx.selected) {
    const auto& leaf = tree.leaves.at(i);
    ctx.blocks.push_back({i, join(leaf.path, " / "), leaf.summary, leaf.raw_text});
  }
}

std::string assemble_context(const RetrievalContext& ctx, const PaperTree& tree) {
  std::string out;
  std::string previous_path;
  bool first = true;
  for (auto i : ctx.selected) {
    const auto& leaf = tree.leaves.at(i);
    std::string path = join(leaf.path, " / ");
    if (first || path != previous_path) {
      if (!first) out += "\n";
      out += "> " + path + "\n";
    }
    out += "[summary] " + leaf.summary + "\n";
    out += std::string(trim(leaf.raw_text)) + "\n";
    out += "[source: " + leaf.id + "]\n";
    previous_path = std::move(path);
    first = false;
  }
  return out;
}

RetrievalResult retrieve(std::string_view query, const PaperTree& tree, const RetrievalConfig& config,
                         const Backends& backends) {
  config.validate();
  if (!backends.embedder) throw std::invalid_argument("retrieve: no embedding backend configured");
  RetrievalResult result;
  result.query_embedding = embed_query(query, *backends.embedder);
  result.sections = select_sections(query, result.query_embedding, tree, backends.llm.get(), config.alpha,
                                    config.sections);

  std::vector<std::size_t> selected;
  for (const auto& s : result.sections) selected.push_back(s.section);
  std::set<std::size_t> scope;
  for (auto s : selected)
    for (auto leaf : tree.section_scope(s)) scope.insert(leaf);
  for (auto leaf : scope) result.segments.push_back(score_segment(result.query_embedding, tree.leaves[leaf], config.beta));
  if (config.rerank)
    result.segments = rerank(query, std::move(result.segments), config.rerank_k, backends.reranker.get(), tree);

  LeafValues values;
  for (const auto& s : result.segments) {
    const auto& leaf = tree.leaves[s.leaf];
    std::size_t cost = leaf.token_cost;
    if (config.count_summary_cost) cost += count_words(leaf.summary);
    values[s.leaf] = {s.score, cost};
  }
  auto paths = enumerate_paths(tree, selected, values);
  result.context = select_under_budget(std::move(paths), values, config.budget, config.paths);
  attach_blocks(result.context, tree);
  return result;
}

}  // namespace ptrag
