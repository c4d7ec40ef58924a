#include "ptrag/outline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "ptrag/parallel.hpp"
#include "ptrag/prompts.hpp"
#include "ptrag/text.hpp"

namespace ptrag {

namespace {

constexpr std::array<std::string_view, 16> kConventionalSections = {
    "introduction", "related work", "background", "method",     "methods",     "methodology",
    "approach",     "experiments",  "results",    "evaluation", "discussion",  "conclusion",
    "conclusions",  "references",   "appendix",   "abstract"};

bool is_fence(std::string_view line) {
  auto t = trim(line);
  return t.starts_with("```") || t.starts_with("~~~");
}

// Leading numbering token, e.g. "3.2.1" or "A.1." (without the trailing dot).
std::string_view numbering_token(std::string_view title) {
  title = trim(title);
  std::size_t end = 0;
  while (end < title.size() && !std::isspace(static_cast<unsigned char>(title[end]))) ++end;
  std::string_view tok = title.substr(0, end);
  while (!tok.empty() && tok.back() == '.') tok.remove_suffix(1);
  return tok;
}

std::string strip_numbering(std::string_view title) {
  title = trim(title);
  if (numbering_depth(title) > 0) {
    std::size_t end = 0;
    while (end < title.size() && !std::isspace(static_cast<unsigned char>(title[end]))) ++end;
    title = trim(title.substr(end));
  }
  while (!title.empty() && (title.back() == ':' || title.back() == '.')) title.remove_suffix(1);
  return to_lower(trim(title));
}

std::string excerpt_after(const std::vector<std::string_view>& lines, std::size_t from, std::size_t to,
                          std::size_t max_chars) {
  std::string out;
  for (std::size_t i = from; i < to && out.size() < max_chars; ++i) {
    auto t = trim(lines[i]);
    if (t.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(t);
  }
  if (out.size() > max_chars) {
    std::size_t cut = max_chars;
    // Do not split a UTF-8 sequence.
    while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
    out.resize(cut);
  }
  return out;
}

}  // namespace

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::Child:
      return "child";
    case Relation::Sibling:
      return "sibling";
    case Relation::AncestorDescendant:
      return "ancestor-descendant";
    case Relation::NotAHeading:
      return "not-a-heading";
  }
  return "?";
}

RelationLabel RelationLabel::from_probabilities(const std::array<double, 4>& p) {
  RelationLabel l;
  l.probabilities = p;
  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (p[i] > p[best]) best = i;
  l.selected = static_cast<Relation>(best);
  l.confidence = p[best];
  return l;
}

RelationLabel RelationLabel::certain(Relation r) {
  std::array<double, 4> p{0, 0, 0, 0};
  p[static_cast<std::size_t>(r)] = 1.0;
  return from_probabilities(p);
}

RelationLabel RelationLabel::failed() {
  RelationLabel l = from_probabilities({0.25, 0.25, 0.25, 0.25});
  l.confidence = 0.0;
  return l;
}

std::vector<std::string> OutlineTree::title_path(std::size_t node) const {
  std::vector<std::string> out;
  for (auto id : node_path(node)) out.push_back(nodes[id].title);
  return out;
}

std::vector<std::size_t> OutlineTree::node_path(std::size_t node) const {
  std::vector<std::size_t> out;
  std::optional<std::size_t> cur = node;
  while (cur) {
    out.push_back(*cur);
    cur = nodes.at(*cur).parent;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::string> validate_outline(const OutlineTree& tree) {
  std::vector<std::string> errors;
  if (tree.nodes.empty()) return {"tree has no nodes"};
  const auto& nodes = tree.nodes;
  if (nodes[0].parent || nodes[0].depth != 0) errors.push_back("node 0 is not a depth-0 root");
  std::vector<int> parent_refs(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (i > 0) {
      if (!n.parent) {
        errors.push_back("node " + n.id + " has no parent");
        continue;
      }
      if (*n.parent >= i) errors.push_back("node " + n.id + " has a parent that does not precede it");
      else if (n.depth != nodes[*n.parent].depth + 1)
        errors.push_back("node " + n.id + " depth is not parent depth + 1");
    }
    for (auto c : n.children) {
      if (c >= nodes.size() || nodes[c].parent != i) {
        errors.push_back("node " + n.id + " lists a child that does not point back");
      } else {
        ++parent_refs[c];
      }
    }
  }
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (parent_refs[i] != 1) errors.push_back("node " + nodes[i].id + " is listed by " +
                                              std::to_string(parent_refs[i]) + " parents");
  // Pre-order traversal must visit heading lines in increasing order.
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    auto id = stack.back();
    stack.pop_back();
    if (order.size() > nodes.size()) {
      errors.push_back("cycle detected");
      break;
    }
    order.push_back(id);
    const auto& ch = nodes[id].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it)
      if (*it < nodes.size()) stack.push_back(*it);
  }
  if (order.size() != nodes.size()) errors.push_back("pre-order traversal does not reach every node once");
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& a = nodes[order[k - 1]];
    const auto& b = nodes[order[k]];
    if (!(a.line_begin < b.line_begin) || a.line_end > b.line_begin)
      errors.push_back("line spans of " + a.id + " and " + b.id + " are not increasing");
  }
  for (const auto& n : nodes)
    if (n.line_end < n.line_begin) errors.push_back("node " + n.id + " has an inverted span");
  return errors;
}

std::vector<HeadingCandidate> extract_heading_candidates(std::string_view markdown) {
  std::vector<HeadingCandidate> out;
  auto lines = split_lines(markdown);
  bool in_fence = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (is_fence(line)) {
      in_fence = !in_fence;
      continue;
    }
    if (in_fence) continue;
    std::string_view t = trim(line);
    if (!t.starts_with('#')) continue;
    std::size_t hashes = 0;
    while (hashes < t.size() && t[hashes] == '#') ++hashes;
    std::string_view text = trim(t.substr(hashes));
    // ATX closing sequence: "## Title ##".
    std::size_t close = text.size();
    while (close > 0 && text[close - 1] == '#') --close;
    if (close < text.size() && (close == 0 || std::isspace(static_cast<unsigned char>(text[close - 1]))))
      text = trim(text.substr(0, close));
    if (text.empty()) continue;
    out.push_back({std::string(text), static_cast<int>(hashes), i, 1.0});
  }
  return out;
}

int numbering_depth(std::string_view title) {
  std::string_view tok = numbering_token(title);
  if (tok.empty()) return 0;
  int components = 0;
  std::size_t pos = 0;
  while (pos <= tok.size()) {
    std::size_t dot = tok.find('.', pos);
    std::string_view part = tok.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
    bool digits = !part.empty() && part.size() <= 3 &&
                  std::all_of(part.begin(), part.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    bool letter = components == 0 && part.size() == 1 && std::isupper(static_cast<unsigned char>(part[0]));
    if (!digits && !letter) return 0;
    ++components;
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  // A bare letter ("A Study of ...") is not a numbering prefix.
  if (components == 1 && !std::isdigit(static_cast<unsigned char>(tok[0]))) return 0;
  return components;
}

bool is_conventional_section(std::string_view title) {
  std::string name = strip_numbering(title);
  return std::find(kConventionalSections.begin(), kConventionalSections.end(), name) != kConventionalSections.end();
}

int rule_fallback_level(const HeadingCandidate& candidate, int open_depth) {
  if (is_conventional_section(candidate.text)) return 1;
  if (int n = numbering_depth(candidate.text); n > 0) return n;
  return std::clamp(candidate.hash_depth, 1, std::max(1, open_depth + 1));
}

RelationLabel classify_adjacent_pair(const HeadingCandidate& prev, HeadingCandidate& next,
                                     const PairContext& context, TextGenerator& backend) {
  RelationLabel label = RelationLabel::failed();
  try {
    std::string reply = backend.generate(
        heading_relation_prompt(prev.text, context.first_excerpt, next.text, context.second_excerpt));
    if (auto probs = parse_relation_reply(reply)) {
      label = RelationLabel::from_probabilities(*probs);
    } else {
      spdlog::warn("heading relation for '{}': unparseable reply, using rule fallback", next.text);
    }
  } catch (const BackendError& e) {
    spdlog::warn("heading relation for '{}': {}; using rule fallback", next.text, e.what());
  }
  next.confidence = label.confidence;
  return label;
}

OutlineTree reconcile_hierarchy(const std::vector<HeadingCandidate>& candidates,
                                const std::vector<RelationLabel>& labels, std::size_t line_count,
                                const OutlineOptions& options) {
  OutlineTree tree;
  if (candidates.empty()) {
    tree.nodes.push_back({"S0", "Document", 0, 0, std::max<std::size_t>(line_count, 1), std::nullopt, {}});
    tree.synthetic_root = true;
    return tree;
  }
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].line_index <= candidates[i - 1].line_index)
      throw std::invalid_argument("reconcile_hierarchy: candidate line indices must be strictly increasing");
  line_count = std::max(line_count, candidates.back().line_index + 1);

  const auto& title = candidates.front();
  tree.nodes.push_back({"S0", title.text, 0, title.line_index, line_count, std::nullopt, {}});
  // open[d] is the most recent node at depth d along the current branch.
  std::vector<std::size_t> open{0};
  // Hash depths are read relative to the title's own level.
  const int hash_offset = title.hash_depth;

  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    const int cur = static_cast<int>(open.size()) - 1;
    RelationLabel label = i - 1 < labels.size() ? labels[i - 1] : RelationLabel::failed();
    int depth = 0;
    if (label.confidence >= options.confidence_threshold) {
      switch (label.selected) {
        case Relation::NotAHeading:
          tree.demoted_lines.push_back(cand.line_index);
          continue;
        case Relation::Child:
          depth = cur + 1;
          break;
        case Relation::Sibling:
          depth = cur;
          break;
        case Relation::AncestorDescendant:
          depth = cur - 1;
          break;
      }
    } else if (options.fallback == OutlineFallback::Flat) {
      depth = 1;
    } else {
      HeadingCandidate relative = cand;
      relative.hash_depth = std::max(1, cand.hash_depth - hash_offset);
      depth = rule_fallback_level(relative, cur);
    }
    depth = std::clamp(depth, 1, cur + 1);
    std::size_t parent = open[static_cast<std::size_t>(depth - 1)];
    std::size_t id = tree.nodes.size();
    tree.nodes.push_back({"S" + std::to_string(id), cand.text, depth, cand.line_index, line_count, parent, {}});
    tree.nodes[parent].children.push_back(id);
    open.resize(static_cast<std::size_t>(depth));
    open.push_back(id);
  }
  for (std::size_t i = 0; i + 1 < tree.nodes.size(); ++i) tree.nodes[i].line_end = tree.nodes[i + 1].line_begin;
  return tree;
}

OutlineResult infer_outline(std::string_view markdown, TextGenerator& backend, const OutlineOptions& options) {
  OutlineResult result;
  auto lines = split_lines(markdown);
  result.candidates = extract_heading_candidates(markdown);
  auto& cands = result.candidates;
  if (cands.size() > 1) {
    std::vector<std::string> excerpts(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      std::size_t to = i + 1 < cands.size() ? cands[i + 1].line_index : lines.size();
      excerpts[i] = excerpt_after(lines, cands[i].line_index + 1, to, options.context_chars);
    }
    result.labels.resize(cands.size() - 1);
    parallel_for(cands.size() - 1, options.max_in_flight, [&](std::size_t i) {
      result.labels[i] = classify_adjacent_pair(cands[i], cands[i + 1], {excerpts[i], excerpts[i + 1]}, backend);
    });
  }
  for (const auto& l : result.labels)
    if (l.confidence < options.confidence_threshold) ++result.fallback_pairs;
  result.tree = reconcile_hierarchy(cands, result.labels, lines.size(), options);
  return result;
}

}  // namespace ptrag
