#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ptrag/tree.hpp"

namespace ptrag {

using nlohmann::json;

namespace {

[[noreturn]] void corrupt(const std::string& where, const std::string& what) {
  throw IndexFormatError(IndexFormatError::Kind::Corrupt, "corrupt index: field '" + where + "' " + what);
}

const json& member(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) corrupt(where, "is not an object");
  auto it = j.find(key);
  if (it == j.end()) corrupt(where + "." + key, "is missing");
  return *it;
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  const json& v = member(j, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    corrupt(where + "." + key, "has the wrong type");
  }
}

json outline_node_to_json(const OutlineTree& t, std::size_t id) {
  const auto& n = t.nodes[id];
  json children = json::array();
  for (auto c : n.children) children.push_back(outline_node_to_json(t, c));
  return {{"id", n.id},
          {"title", n.title},
          {"depth", n.depth},
          {"line_begin", n.line_begin},
          {"line_end", n.line_end},
          {"children", std::move(children)}};
}

void outline_node_from_json(const json& j, std::optional<std::size_t> parent, const std::string& where,
                            OutlineTree& t) {
  std::size_t id = t.nodes.size();
  OutlineNode n;
  n.id = get<std::string>(j, "id", where);
  n.title = get<std::string>(j, "title", where);
  n.depth = get<int>(j, "depth", where);
  n.line_begin = get<std::size_t>(j, "line_begin", where);
  n.line_end = get<std::size_t>(j, "line_end", where);
  n.parent = parent;
  t.nodes.push_back(std::move(n));
  if (parent) t.nodes[*parent].children.push_back(id);
  const json& children = member(j, "children", where);
  if (!children.is_array()) corrupt(where + ".children", "is not an array");
  for (std::size_t k = 0; k < children.size(); ++k)
    outline_node_from_json(children[k], id, where + ".children[" + std::to_string(k) + "]", t);
}

json optional_vector(const std::optional<Embedding>& v) { return v ? json(*v) : json(nullptr); }

std::optional<Embedding> optional_vector_from(const json& j, const std::string& key, const std::string& where) {
  const json& v = member(j, key, where);
  if (v.is_null()) return std::nullopt;
  try {
    return v.get<Embedding>();
  } catch (const json::exception&) {
    corrupt(where + "." + key, "is not a number array");
  }
}

}  // namespace

std::string serialize_index(const PaperTree& tree) {
  json leaves = json::array();
  for (const auto& l : tree.leaves) {
    leaves.push_back({{"id", l.id},
                      {"section", l.section},
                      {"order_index", l.order_index},
                      {"token_cost", l.token_cost},
                      {"over_cap", l.over_cap},
                      {"summary_fallback", l.summary_fallback},
                      {"path", l.path},
                      {"raw_text", l.raw_text},
                      {"summary", l.summary},
                      {"raw_embedding", optional_vector(l.raw_embedding)},
                      {"summary_embedding", optional_vector(l.summary_embedding)}});
  }
  json doc = {{"format", "ptrag-index"},
              {"version", kIndexVersion},
              {"doc_title", tree.doc_title},
              {"outline", outline_node_to_json(tree.outline, 0)},
              {"demoted_lines", tree.outline.demoted_lines},
              {"synthetic_root", tree.outline.synthetic_root},
              {"leaves", std::move(leaves)}};
  return doc.dump(1) + "\n";
}

PaperTree parse_index(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IndexFormatError(IndexFormatError::Kind::Corrupt, std::string("corrupt index: ") + e.what());
  }
  if (!doc.is_object()) corrupt("<root>", "is not an object");
  if (!doc.contains("version")) corrupt("version", "is missing");
  const json& version = doc["version"];
  if (!version.is_string() || version.get<std::string>() != kIndexVersion) {
    throw IndexFormatError(IndexFormatError::Kind::Version,
                           "unsupported index version " + version.dump() + " (expected \"" +
                               std::string(kIndexVersion) + "\")");
  }

  PaperTree tree;
  tree.doc_title = get<std::string>(doc, "doc_title", "");
  outline_node_from_json(member(doc, "outline", ""), std::nullopt, "outline", tree.outline);
  tree.outline.demoted_lines = get<std::vector<std::size_t>>(doc, "demoted_lines", "");
  tree.outline.synthetic_root = get<bool>(doc, "synthetic_root", "");

  const json& leaves = member(doc, "leaves", "");
  if (!leaves.is_array()) corrupt("leaves", "is not an array");
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const std::string where = "leaves[" + std::to_string(i) + "]";
    const json& j = leaves[i];
    LeafSegment l;
    l.id = get<std::string>(j, "id", where);
    l.section = get<std::size_t>(j, "section", where);
    l.order_index = get<std::size_t>(j, "order_index", where);
    l.token_cost = get<std::size_t>(j, "token_cost", where);
    l.over_cap = get<bool>(j, "over_cap", where);
    l.summary_fallback = get<bool>(j, "summary_fallback", where);
    l.path = get<std::vector<std::string>>(j, "path", where);
    l.raw_text = get<std::string>(j, "raw_text", where);
    l.summary = get<std::string>(j, "summary", where);
    l.raw_embedding = optional_vector_from(j, "raw_embedding", where);
    l.summary_embedding = optional_vector_from(j, "summary_embedding", where);
    if (l.order_index != i) corrupt(where + ".order_index", "is out of sequence");
    if (l.token_cost == 0) corrupt(where + ".token_cost", "is zero");
    if (l.section >= tree.outline.nodes.size()) corrupt(where + ".section", "names an unknown section");
    tree.leaves.push_back(std::move(l));
  }
  try {
    tree.section_index = index_sections(tree.outline, tree.leaves);
  } catch (const std::invalid_argument& e) {
    corrupt("leaves", std::string("are inconsistent: ") + e.what());
  }
  return tree;
}

void save_index(const PaperTree& tree, const std::filesystem::path& location) {
  std::ofstream out(location, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + location.string() + " for writing");
  out << serialize_index(tree);
  out.flush();
  if (!out) throw std::runtime_error("error while writing " + location.string());
}

PaperTree load_index(const std::filesystem::path& location) {
  std::ifstream in(location, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + location.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_index(ss.str());
}

}  // namespace ptrag
