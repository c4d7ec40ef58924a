#include "ptrag/multihop.hpp"

#include <algorithm>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "ptrag/parallel.hpp"
#include "ptrag/prompts.hpp"

namespace ptrag {

std::vector<std::string> decompose_query(std::string_view query, int max_hops, TextGenerator& backend) {
  if (max_hops < 1) throw std::invalid_argument("decompose_query: H must be at least 1");
  std::string reply;
  try {
    reply = backend.generate(query_decomposition_prompt(query, max_hops));
  } catch (const BackendError& e) {
    spdlog::warn("query decomposition failed ({}); retrieving with the original query", e.what());
    return {std::string(query)};
  }
  auto lines = parse_subquery_lines(reply);
  if (lines.size() >= 2) {
    if (lines.size() > static_cast<std::size_t>(max_hops)) lines.resize(static_cast<std::size_t>(max_hops));
    return lines;
  }
  // Not decomposable: the complete reply drives retrieval.
  std::string whole(trim(reply));
  if (whole.empty()) return {std::string(query)};
  return {whole};
}

std::set<std::string> extract_entities(std::string_view context, std::string_view next_query, double threshold,
                                       TextGenerator& backend) {
  if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("extract_entities: threshold must lie in [0, 1]");
  std::set<std::string> out;
  try {
    auto parsed = parse_entity_reply(backend.generate(entity_extraction_prompt(context, next_query)));
    if (!parsed) {
      spdlog::warn("entity extraction: unparseable reply; next query unchanged");
      return out;
    }
    for (const auto& e : *parsed)
      if (e.confidence >= threshold) out.insert(e.name);
  } catch (const BackendError& e) {
    spdlog::warn("entity extraction failed ({}); next query unchanged", e.what());
  }
  return out;
}

std::string inject_entities(std::string_view subquery, const std::set<std::string>& entities) {
  if (entities.empty()) return std::string(subquery);
  std::vector<std::string> list(entities.begin(), entities.end());
  return std::string(subquery) + " [context entities: " + join(list, ", ") + "]";
}

MultihopResult run_multihop(std::string_view query, const PaperTree& tree, const RetrievalConfig& retrieval,
                            const MultihopConfig& config, const Backends& backends) {
  if (config.hops < 1) throw std::invalid_argument("run_multihop: H must be at least 1");
  MultihopResult result;
  if (config.hops == 1 || !backends.llm) {
    result.subqueries = {std::string(query)};
  } else {
    result.subqueries = decompose_query(query, config.hops, *backends.llm);
  }

  std::vector<PathCandidate> hop_paths;
  int stale = 0;
  for (std::size_t t = 0; t < result.subqueries.size(); ++t) {
    HopRecord hop;
    hop.hop = static_cast<int>(t + 1);
    hop.query = inject_entities(result.subqueries[t], result.entities);
    RetrievalResult r = retrieve(hop.query, tree, retrieval, backends);
    hop.selected = r.context.selected;
    for (const auto& seg : r.segments) {
      if (!std::binary_search(hop.selected.begin(), hop.selected.end(), seg.leaf)) continue;
      LeafValue v{seg.score, tree.leaves[seg.leaf].token_cost};
      auto [it, inserted] = result.values.emplace(seg.leaf, v);
      if (!inserted) it->second.score = std::max(it->second.score, seg.score);
    }
    for (auto& p : r.context.paths)
      if (std::find(hop_paths.begin(), hop_paths.end(), p) == hop_paths.end()) hop_paths.push_back(p);

    const bool last = t + 1 == result.subqueries.size();
    if (!last && backends.llm) {
      auto found = extract_entities(assemble_context(r.context, tree), result.subqueries[t + 1],
                                    config.entity_threshold, *backends.llm);
      for (const auto& e : found)
        if (!result.entities.count(e)) hop.new_entities.insert(e);
      result.entities.insert(hop.new_entities.begin(), hop.new_entities.end());
      stale = hop.new_entities.empty() ? stale + 1 : 0;
    }
    result.hops.push_back(std::move(hop));
    if (stale >= 2) break;
  }

  // Merge: union of every hop's evidence, re-trimmed to the global budget.
  std::vector<std::size_t> merged;
  std::size_t cost = 0;
  for (const auto& [leaf, v] : result.values) {
    merged.push_back(leaf);
    cost += v.cost;
  }
  RetrievalContext ctx;
  ctx.budget = retrieval.budget;
  if (cost <= retrieval.budget) {
    ctx.selected = merged;
    ctx.total_cost = cost;
  } else {
    PathCandidate all;
    all.leaves = merged;
    ctx = select_under_budget({all}, result.values, retrieval.budget, 1);
    ctx.paths.clear();
  }
  for (auto& p : hop_paths) {
    bool used = std::any_of(p.leaves.begin(), p.leaves.end(), [&](std::size_t l) {
      return std::binary_search(ctx.selected.begin(), ctx.selected.end(), l);
    });
    if (used) ctx.paths.push_back(std::move(p));
  }
  attach_blocks(ctx, tree);
  result.context = std::move(ctx);
  return result;
}

std::string transform_multidoc_query(std::string_view query, TextGenerator& backend) {
  try {
    std::string reply(trim(backend.generate(query_transformation_prompt(query))));
    if (!reply.empty()) return reply;
    spdlog::warn("query transformation returned nothing; using the original query");
  } catch (const BackendError& e) {
    spdlog::warn("query transformation failed ({}); using the original query", e.what());
  }
  return std::string(query);
}

MultidocResult run_multidoc(std::string_view query, const std::vector<const PaperTree*>& trees,
                            const RetrievalConfig& retrieval, const Backends& backends) {
  if (trees.empty()) throw std::invalid_argument("run_multidoc: no documents");
  MultidocResult result;
  result.transformed_query = backends.llm ? transform_multidoc_query(query, *backends.llm) : std::string(query);
  result.per_document_budget = retrieval.budget / trees.size();
  RetrievalConfig per_doc = retrieval;
  per_doc.budget = result.per_document_budget;

  result.documents.resize(trees.size());
  parallel_for(trees.size(), 4, [&](std::size_t i) {
    auto& doc = result.documents[i];
    doc.label = "Document " + std::to_string(i + 1);
    doc.doc_title = trees[i]->doc_title;
    doc.retrieval = retrieve(result.transformed_query, *trees[i], per_doc, backends);
    doc.context = assemble_context(doc.retrieval.context, *trees[i]);
  });

  std::vector<LabelledEvidence> evidence;
  for (const auto& doc : result.documents) evidence.push_back({doc.label + ": " + doc.doc_title, doc.context});
  result.synthesis_prompt = synthesis_prompt(query, evidence);
  return result;
}

}  // namespace ptrag
