#pragma once
// Shared fixtures: hand-assembled PaperTrees and small random generators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <memory>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ptrag/prompts.hpp"
#include "ptrag/tree.hpp"

namespace ptrag::fixture {

struct NodeSpec {
  int depth = 1;  // relative to the root
  std::string title;
  std::vector<std::size_t> leaf_costs;
};

/// Outline from a pre-order list of nodes under a root titled `title`; every
/// node owns one leaf per entry of `leaf_costs`, raw text "leaf <n>".
inline PaperTree make_tree(const std::string& title, const std::vector<NodeSpec>& nodes,
                           const std::vector<std::size_t>& root_costs = {}) {
  PaperTree tree;
  tree.doc_title = title;
  std::size_t line = 0;
  tree.outline.nodes.push_back({"S0", title, 0, line, 0, std::nullopt, {}});
  std::vector<std::size_t> open{0};
  for (const auto& spec : nodes) {
    line += 10;
    open.resize(static_cast<std::size_t>(spec.depth));
    std::size_t parent = open.back();
    std::size_t id = tree.outline.nodes.size();
    tree.outline.nodes.push_back({"S" + std::to_string(id), spec.title, spec.depth, line, 0, parent, {}});
    tree.outline.nodes[parent].children.push_back(id);
    open.push_back(id);
  }
  for (std::size_t i = 0; i + 1 < tree.outline.nodes.size(); ++i)
    tree.outline.nodes[i].line_end = tree.outline.nodes[i + 1].line_begin;
  tree.outline.nodes.back().line_end = line + 10;

  auto add_leaves = [&](std::size_t node, const std::vector<std::size_t>& costs) {
    for (auto c : costs) {
      LeafSegment leaf;
      leaf.order_index = tree.leaves.size();
      char id[16];
      std::snprintf(id, sizeof id, "L%05zu", leaf.order_index);
      leaf.id = id;
      leaf.raw_text = "leaf " + std::to_string(leaf.order_index);
      leaf.summary = "summary " + std::to_string(leaf.order_index);
      leaf.token_cost = c;
      leaf.section = node;
      leaf.path = tree.outline.title_path(node);
      tree.leaves.push_back(std::move(leaf));
    }
  };
  add_leaves(0, root_costs);
  for (std::size_t i = 0; i < nodes.size(); ++i) add_leaves(i + 1, nodes[i].leaf_costs);
  tree.section_index = index_sections(tree.outline, tree.leaves);
  return tree;
}

/// Two-dimensional unit vector with cosine `c` against (1, 0).
inline Embedding at_cosine(double c) { return {c, std::sqrt(std::max(0.0, 1.0 - c * c))}; }

inline Backends stub_backends() {
  return {std::make_shared<RuleStubGenerator>(), std::make_shared<HashEmbedder>(256),
          std::make_shared<OverlapReranker>()};
}

inline std::string words(std::mt19937_64& rng, std::size_t n, const std::vector<std::string>& vocab) {
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += vocab[pick(rng)];
  }
  return out;
}

inline const std::vector<std::string>& filler_vocab() {
  static const std::vector<std::string> v{"the",    "model",  "data",  "shore",  "frame",  "method", "result",
                                          "sample", "count",  "error", "signal", "value",  "table",  "figure",
                                          "window", "metric", "track", "layer",  "prior",  "budget"};
  return v;
}

}  // namespace ptrag::fixture
