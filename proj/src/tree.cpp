#include "ptrag/tree.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ptrag/parallel.hpp"
#include "ptrag/prompts.hpp"

namespace ptrag {

std::vector<std::size_t> PaperTree::selectable_sections() const {
  std::vector<std::size_t> out;
  if (outline.nodes.empty()) return out;
  if (!section_index.empty() && !section_index[0].empty()) out.push_back(0);
  for (std::size_t i = 1; i < outline.nodes.size(); ++i)
    if (outline.nodes[i].depth == 1) out.push_back(i);
  return out;
}

std::vector<std::size_t> PaperTree::subtree_leaves(std::size_t node) const {
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    auto id = stack.back();
    stack.pop_back();
    const auto& range = section_index.at(id);
    for (auto i = range.begin; i < range.end; ++i) out.push_back(i);
    for (auto c : outline.nodes.at(id).children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> PaperTree::section_scope(std::size_t node) const {
  if (node != 0) return subtree_leaves(node);
  const auto& r = section_index.at(0);
  std::vector<std::size_t> out;
  for (auto i = r.begin; i < r.end; ++i) out.push_back(i);
  return out;
}

std::size_t PaperTree::section_count() const {
  return outline.nodes.size() > 1 ? outline.nodes.size() - 1 : 1;
}

std::vector<LeafRange> index_sections(const OutlineTree& outline, const std::vector<LeafSegment>& leaves) {
  std::vector<LeafRange> ranges(outline.nodes.size());
  std::vector<bool> seen(outline.nodes.size(), false);
  std::size_t i = 0;
  while (i < leaves.size()) {
    std::size_t s = leaves[i].section;
    if (s >= ranges.size()) throw std::invalid_argument("leaf " + leaves[i].id + " names an unknown section");
    if (seen[s]) throw std::invalid_argument("leaves of section " + outline.nodes[s].id + " are not contiguous");
    seen[s] = true;
    std::size_t j = i;
    while (j < leaves.size() && leaves[j].section == s) ++j;
    ranges[s] = {i, j};
    i = j;
  }
  for (std::size_t s = 0; s < ranges.size(); ++s)
    if (!seen[s]) ranges[s] = {0, 0};
  return ranges;
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

struct Block {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool splittable = true;  // fenced code is never split
};

bool is_list_item(std::string_view t) {
  if (t.starts_with("- ") || t.starts_with("* ") || t.starts_with("+ ")) return true;
  std::size_t d = 0;
  while (d < t.size() && std::isdigit(static_cast<unsigned char>(t[d]))) ++d;
  return d > 0 && d + 1 < t.size() && (t[d] == '.' || t[d] == ')') && t[d + 1] == ' ';
}

// Paragraphs, list items and fenced blocks with byte offsets into `body`.
std::vector<Block> split_blocks(std::string_view body) {
  std::vector<Block> blocks;
  std::optional<Block> cur;
  bool in_fence = false;
  auto close = [&] {
    if (cur) blocks.push_back(*cur);
    cur.reset();
  };
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t nl = body.find('\n', pos);
    std::size_t line_end = nl == std::string_view::npos ? body.size() : nl;
    std::string_view line = body.substr(pos, line_end - pos);
    std::string_view t = trim(line);
    std::size_t content_begin = pos + static_cast<std::size_t>(t.data() - line.data());
    std::size_t content_end = content_begin + t.size();
    bool fence = t.starts_with("```") || t.starts_with("~~~");
    if (in_fence) {
      cur->end = line_end;
      if (fence) {
        in_fence = false;
        cur->end = content_end;
        close();
      }
    } else if (fence) {
      close();
      cur = Block{content_begin, content_end, false};
      in_fence = true;
    } else if (t.empty()) {
      close();
    } else if (is_list_item(t)) {
      close();
      cur = Block{content_begin, content_end, true};
    } else if (cur) {
      cur->end = content_end;
    } else {
      cur = Block{content_begin, content_end, true};
    }
    pos = line_end + 1;
  }
  close();
  return blocks;
}

class Packer {
 public:
  Packer(std::string_view body, std::size_t cap, const TokenCounter& counter, std::vector<RawSegment>& out)
      : body_(body), cap_(cap), counter_(counter), out_(out) {}

  std::size_t tokens(std::size_t b, std::size_t e) const { return counter_(body_.substr(b, e - b)); }

  /// Appends [b, e) to the open segment if the union still fits.
  bool try_extend(std::size_t b, std::size_t e) {
    if (!open_) return false;
    if (tokens(begin_, e) > cap_) return false;
    end_ = e;
    (void)b;
    return true;
  }

  void start(std::size_t b, std::size_t e) {
    flush();
    open_ = true;
    begin_ = b;
    end_ = e;
  }

  void emit_over_cap(std::size_t b, std::size_t e) {
    flush();
    std::string text(body_.substr(b, e - b));
    std::size_t n = counter_(text);
    spdlog::info("segment of {} tokens exceeds the cap of {} (single sentence)", n, cap_);
    out_.push_back({std::move(text), n, true});
  }

  void flush() {
    if (!open_) return;
    open_ = false;
    std::string text(body_.substr(begin_, end_ - begin_));
    std::size_t n = counter_(text);
    if (n > 0) out_.push_back({std::move(text), n, false});
  }

 private:
  std::string_view body_;
  std::size_t cap_;
  const TokenCounter& counter_;
  std::vector<RawSegment>& out_;
  bool open_ = false;
  std::size_t begin_ = 0;
  std::size_t end_ = 0;
};

}  // namespace

std::vector<RawSegment> segment_section(std::string_view body, std::size_t max_tokens, const TokenCounter& counter) {
  if (max_tokens < 16) throw std::invalid_argument("segment_section: max_tokens must be at least 16");
  std::vector<RawSegment> out;
  Packer packer(body, max_tokens, counter, out);
  for (const auto& block : split_blocks(body)) {
    std::size_t n = packer.tokens(block.begin, block.end);
    if (n == 0) continue;
    if (packer.try_extend(block.begin, block.end)) continue;
    if (n <= max_tokens) {
      packer.start(block.begin, block.end);
      continue;
    }
    // Oversized block: pack its sentences, never joining them with
    // neighbouring blocks.
    packer.flush();
    if (!block.splittable) {
      packer.emit_over_cap(block.begin, block.end);
      continue;
    }
    std::string_view text = body.substr(block.begin, block.end - block.begin);
    for (const auto& s : sentence_spans(text)) {
      std::size_t b = block.begin + s.begin;
      std::size_t e = block.begin + s.end;
      if (packer.try_extend(b, e)) continue;
      if (packer.tokens(b, e) > max_tokens) {
        packer.emit_over_cap(b, e);
      } else {
        packer.start(b, e);
      }
    }
    packer.flush();
  }
  packer.flush();
  return out;
}

// ---------------------------------------------------------------------------
// Summaries

namespace {

std::string cap_tokens(std::string text, std::size_t max_tokens, const TokenCounter& counter) {
  if (counter(text) <= max_tokens) return text;
  std::size_t words = std::min(max_tokens, count_words(text));
  std::string out = truncate_words(text, words);
  while (words > 1 && counter(out) > max_tokens) out = truncate_words(text, --words);
  return out;
}

}  // namespace

SummaryResult summarize_segment(std::string_view doc_title, const std::vector<std::string>& path,
                                std::string_view segment, std::string_view previous_summary, TextGenerator& backend,
                                std::size_t max_tokens, const TokenCounter& counter) {
  std::string reply;
  try {
    reply = std::string(trim(backend.generate(segment_summary_prompt(doc_title, path, previous_summary, segment))));
    if (reply.empty()) spdlog::warn("summary backend returned an empty reply; using leading sentences");
  } catch (const BackendError& e) {
    spdlog::warn("summary backend failed ({}); using leading sentences", e.what());
  }
  if (!reply.empty()) return {cap_tokens(std::move(reply), max_tokens, counter), false};
  std::string extract = first_sentences(segment, 2);
  if (extract.empty()) extract = std::string(trim(segment));
  return {cap_tokens(std::move(extract), max_tokens, counter), true};
}

// ---------------------------------------------------------------------------
// Build

std::string section_body(const OutlineTree& outline, std::size_t node, const std::vector<std::string_view>& lines) {
  const auto& n = outline.nodes.at(node);
  std::size_t from = n.line_begin + 1;
  std::size_t to = std::min(n.line_end, lines.size());
  if (node == 0) from = 0;
  std::string body;
  for (std::size_t i = from; i < to; ++i) {
    if (node == 0 && i == n.line_begin && !outline.synthetic_root) continue;  // the title line itself
    std::string_view line = lines[i];
    if (std::binary_search(outline.demoted_lines.begin(), outline.demoted_lines.end(), i)) {
      std::string_view t = trim(line);
      while (!t.empty() && t.front() == '#') t.remove_prefix(1);
      line = trim(t);
    }
    body.append(line);
    body.push_back('\n');
  }
  return body;
}

namespace {

std::string leaf_id(std::size_t order) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "L%05zu", order);
  return buf;
}

}  // namespace

PaperTree build_index(std::string_view markdown, const IndexConfig& config, const Backends& backends) {
  if (!backends.llm) throw BuildError("build_index: no text-generation backend configured");
  if (!backends.embedder) throw BuildError("build_index: no embedding backend configured");

  PaperTree tree;
  auto lines = split_lines(markdown);
  OutlineResult outline = infer_outline(markdown, *backends.llm, config.outline);
  tree.outline = std::move(outline.tree);
  std::sort(tree.outline.demoted_lines.begin(), tree.outline.demoted_lines.end());
  tree.doc_title = tree.outline.root().title;
  if (outline.fallback_pairs > 0)
    spdlog::info("outline: {} of {} heading pairs resolved by the rule fallback", outline.fallback_pairs,
                 outline.labels.size());

  // Segment each node's own body; nodes are already in document order.
  for (std::size_t node = 0; node < tree.outline.nodes.size(); ++node) {
    std::string body = section_body(tree.outline, node, lines);
    auto path = tree.outline.title_path(node);
    for (auto& seg : segment_section(body, config.segment_cap, config.counter)) {
      LeafSegment leaf;
      leaf.order_index = tree.leaves.size();
      leaf.id = leaf_id(leaf.order_index);
      leaf.raw_text = std::move(seg.text);
      leaf.token_cost = seg.token_cost;
      leaf.over_cap = seg.over_cap;
      leaf.section = node;
      leaf.path = path;
      tree.leaves.push_back(std::move(leaf));
    }
  }
  tree.section_index = index_sections(tree.outline, tree.leaves);

  // Summaries chain within a section, so sections are the unit of parallelism.
  std::vector<std::size_t> owning;
  for (std::size_t node = 0; node < tree.section_index.size(); ++node)
    if (!tree.section_index[node].empty()) owning.push_back(node);
  parallel_for(owning.size(), config.max_in_flight, [&](std::size_t k) {
    const auto range = tree.section_index[owning[k]];
    std::string previous(kSectionStartToken);
    for (auto i = range.begin; i < range.end; ++i) {
      auto& leaf = tree.leaves[i];
      auto s = summarize_segment(tree.doc_title, leaf.path, leaf.raw_text, previous, *backends.llm, config.summary_cap,
                                 config.counter);
      leaf.summary = std::move(s.text);
      leaf.summary_fallback = s.fallback;
      previous = leaf.summary;
    }
  });

  std::vector<std::string> raw_texts;
  std::vector<std::string> summaries;
  for (const auto& leaf : tree.leaves) {
    raw_texts.push_back(leaf.raw_text);
    summaries.push_back(leaf.summary);
  }
  auto embed_channel = [&](const std::vector<std::string>& texts, auto member, const char* name) {
    if (texts.empty()) return;
    try {
      auto vecs = backends.embedder->embed(texts);
      if (vecs.size() != texts.size()) throw BackendError("embedding count mismatch");
      for (std::size_t i = 0; i < vecs.size(); ++i) tree.leaves[i].*member = std::move(vecs[i]);
    } catch (const BackendError& e) {
      spdlog::warn("embedding {} channel failed ({}); leaves keep no {} vectors", name, e.what(), name);
    }
  };
  embed_channel(raw_texts, &LeafSegment::raw_embedding, "raw");
  embed_channel(summaries, &LeafSegment::summary_embedding, "summary");
  return tree;
}

PaperTree build_index_from_file(const std::filesystem::path& input, const IndexConfig& config,
                                const Backends& backends) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw BuildError("read input: cannot open " + input.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw BuildError("read input: error while reading " + input.string());
  return build_index(ss.str(), config, backends);
}

}  // namespace ptrag
