#pragma once
// Optional query-side extensions: multi-hop decomposition with entity
// feedback, and multi-document retrieval through a canonical single-document
// rewrite of the question.

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ptrag/backends.hpp"
#include "ptrag/config.hpp"
#include "ptrag/retrieval.hpp"
#include "ptrag/tree.hpp"

namespace ptrag {

/// 1..max_hops subqueries. When fewer than two can be parsed the whole reply
/// is used as the single subquery; a failing backend yields the original
/// query.
std::vector<std::string> decompose_query(std::string_view query, int max_hops, TextGenerator& backend);

/// Entities with confidence >= threshold. A failing backend or unparseable
/// reply gives the empty set.
std::set<std::string> extract_entities(std::string_view context, std::string_view next_query, double threshold,
                                       TextGenerator& backend);

/// "{subquery} [context entities: e1, e2]", or the subquery unchanged when
/// there are no entities.
std::string inject_entities(std::string_view subquery, const std::set<std::string>& entities);

struct HopRecord {
  int hop = 0;  // 1-based
  std::string query;
  std::vector<std::size_t> selected;
  std::set<std::string> new_entities;
};

struct MultihopResult {
  RetrievalContext context;  // merged, deduplicated, within the global budget
  std::vector<std::string> subqueries;
  std::vector<HopRecord> hops;
  std::set<std::string> entities;
  /// Best score seen for each merged leaf across hops.
  LeafValues values;
};

/// Runs hops until no new entity appears twice in a row, the subqueries run
/// out, or `config.hops` is reached. With hops == 1 the original query is
/// retrieved once, exactly as single-shot retrieval.
MultihopResult run_multihop(std::string_view query, const PaperTree& tree, const RetrievalConfig& retrieval,
                            const MultihopConfig& config, const Backends& backends);

/// The backend's reply, trimmed, is the canonical query. Failure or an empty
/// reply passes the original through.
std::string transform_multidoc_query(std::string_view query, TextGenerator& backend);

struct DocumentEvidence {
  std::string label;  // "Document 1", ...
  std::string doc_title;
  RetrievalResult retrieval;
  std::string context;  // assembled text
};

struct MultidocResult {
  std::string transformed_query;
  std::size_t per_document_budget = 0;
  std::vector<DocumentEvidence> documents;
  std::string synthesis_prompt;
};

/// Retrieves the transformed query independently in each tree under an equal
/// share of the budget and builds one synthesis prompt around the original
/// question. Throws std::invalid_argument for an empty tree list.
MultidocResult run_multidoc(std::string_view query, const std::vector<const PaperTree*>& trees,
                            const RetrievalConfig& retrieval, const Backends& backends);

}  // namespace ptrag
