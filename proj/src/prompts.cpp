#include "ptrag/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <set>

#include "ptrag/outline.hpp"
#include "ptrag/text.hpp"

namespace ptrag {

namespace {

constexpr std::string_view kTaskPrefix = "### TASK ";

// Prompt fields are single lines; embedded newlines would break field lookup.
std::string one_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool space = false;
  for (char c : trim(s)) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    if (c == ' ') {
      if (!space) out.push_back(c);
      space = true;
    } else {
      out.push_back(c);
      space = false;
    }
  }
  return out;
}

std::string header(std::string_view task) { return std::string(kTaskPrefix) + std::string(task) + "\n"; }

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string strip_list_marker(std::string_view line) {
  line = trim(line);
  if (line.starts_with("- ") || line.starts_with("* ") || line.starts_with("+ ")) return std::string(trim(line.substr(2)));
  // "1." "1)" "Q1:" "Q1." "Step 1:"
  std::size_t i = 0;
  if (line.starts_with("Step ")) i = 5;
  else if (!line.empty() && (line[0] == 'Q' || line[0] == 'q')) i = 1;
  std::size_t digits = i;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
  if (digits > i && digits < line.size() && (line[digits] == '.' || line[digits] == ')' || line[digits] == ':'))
    return std::string(trim(line.substr(digits + 1)));
  return std::string(line);
}

}  // namespace

std::string_view prompt_task(std::string_view prompt) {
  if (!prompt.starts_with(kTaskPrefix)) return {};
  auto rest = prompt.substr(kTaskPrefix.size());
  return trim(rest.substr(0, rest.find('\n')));
}

std::optional<std::string> prompt_field(std::string_view prompt, std::string_view label) {
  std::string key = std::string(label) + ": ";
  for (auto line : split_lines(prompt))
    if (line.starts_with(key)) return std::string(line.substr(key.size()));
  return std::nullopt;
}

std::optional<std::string> prompt_block(std::string_view prompt, std::string_view label) {
  std::string marker = "\n" + std::string(label) + ":\n";
  auto pos = prompt.find(marker);
  if (pos == std::string_view::npos) return std::nullopt;
  return std::string(prompt.substr(pos + marker.size()));
}

std::string heading_relation_prompt(std::string_view first_heading, std::string_view first_context,
                                    std::string_view second_heading, std::string_view second_context) {
  std::string p = header(task::kHeadingRelation);
  p += "Two adjacent heading candidates were found in a research paper converted to Markdown.\n";
  p += "Classify how the second candidate relates to the first: child, sibling, descendant of an earlier "
       "ancestor, or not a heading at all.\n";
  p += "Reply with exactly four probabilities in this order and nothing else: "
       "[child, sibling, ancestor-descendant, not-a-heading]\n";
  p += "First heading: " + one_line(first_heading) + "\n";
  p += "First context: " + one_line(first_context) + "\n";
  p += "Second heading: " + one_line(second_heading) + "\n";
  p += "Second context: " + one_line(second_context) + "\n";
  return p;
}

std::optional<std::array<double, 4>> parse_relation_reply(std::string_view reply) {
  std::string_view r = trim(reply);
  if (r.starts_with('[') && r.ends_with(']')) r = r.substr(1, r.size() - 2);
  std::array<double, 4> p{};
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < r.size()) {
    while (i < r.size() && (r[i] == ',' || std::isspace(static_cast<unsigned char>(r[i])))) ++i;
    if (i >= r.size()) break;
    std::size_t b = i;
    while (i < r.size() && r[i] != ',' && !std::isspace(static_cast<unsigned char>(r[i]))) ++i;
    auto v = parse_number(r.substr(b, i - b));
    if (!v || *v < 0.0 || count == 4) return std::nullopt;
    p[count++] = *v;
  }
  if (count != 4) return std::nullopt;
  double sum = p[0] + p[1] + p[2] + p[3];
  if (!(sum > 0.0)) return std::nullopt;
  for (double& x : p) x /= sum;
  return p;
}

std::string segment_summary_prompt(std::string_view doc_title, const std::vector<std::string>& path,
                                   std::string_view previous_summary, std::string_view segment) {
  std::string p = header(task::kSegmentSummary);
  p += "Summarize the segment in at most 128 words. Keep it consistent with the document, its position in "
       "the section hierarchy and the summary of the preceding segment.\n";
  p += "Document title: " + one_line(doc_title) + "\n";
  p += "Section path: " + one_line(join(path, " / ")) + "\n";
  p += "Previous summary: " + one_line(previous_summary) + "\n";
  p += "Segment:\n";
  p += std::string(segment);
  return p;
}

std::string section_alignment_prompt(std::string_view query, std::string_view section_title,
                                     const std::vector<std::string>& path) {
  std::string p = header(task::kSectionAlignment);
  p += "Judge how well the intent of the question matches the conventional role of the section title, for "
       "example whether the question asks about experimental setup or theoretical analysis.\n";
  p += "Reply with a single number between 0 and 1.\n";
  p += "Question: " + one_line(query) + "\n";
  p += "Section: " + one_line(section_title) + "\n";
  p += "Section path: " + one_line(join(path, " / ")) + "\n";
  return p;
}

std::optional<double> parse_unit_score(std::string_view reply) {
  auto v = parse_number(reply);
  if (!v || *v < 0.0 || *v > 1.0) return std::nullopt;
  return v;
}

std::string query_decomposition_prompt(std::string_view query, int max_subqueries) {
  std::string p = header(task::kQueryDecomposition);
  p += "Rewrite the question into at most " + std::to_string(max_subqueries) +
       " sub-questions, one per line, each a single reasoning step, in the order they should be answered.\n";
  p += "Question: " + one_line(query) + "\n";
  return p;
}

std::vector<std::string> parse_subquery_lines(std::string_view reply) {
  std::vector<std::string> out;
  for (auto line : split_lines(reply)) {
    std::string s = strip_list_marker(line);
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::string entity_extraction_prompt(std::string_view context, std::string_view next_query) {
  std::string p = header(task::kEntityExtraction);
  p += "List the entities in the context that are relevant to the next question, one per line as "
       "`entity<TAB>confidence` with confidence between 0 and 1.\n";
  p += "Next question: " + one_line(next_query) + "\n";
  p += "Context:\n";
  p += std::string(context);
  return p;
}

std::optional<std::vector<ScoredEntity>> parse_entity_reply(std::string_view reply) {
  std::vector<ScoredEntity> out;
  bool any = false;
  for (auto line : split_lines(reply)) {
    line = trim(line);
    if (line.empty()) continue;
    std::size_t sep = line.rfind('\t');
    if (sep == std::string_view::npos) sep = line.rfind('|');
    if (sep == std::string_view::npos) continue;
    std::string name(trim(strip_list_marker(line.substr(0, sep))));
    auto conf = parse_number(line.substr(sep + 1));
    if (name.empty() || !conf || *conf < 0.0 || *conf > 1.0) continue;
    out.push_back({std::move(name), *conf});
    any = true;
  }
  if (!any) return std::nullopt;
  return out;
}

std::string query_transformation_prompt(std::string_view query) {
  std::string p = header(task::kQueryTransformation);
  p += "Rewrite the question about several papers as the equivalent question about a single paper. Reply with "
       "the rewritten question only.\n";
  p += "Question: " + one_line(query) + "\n";
  return p;
}

std::string answer_prompt(std::string_view query, std::string_view context) {
  std::string p = header(task::kAnswer);
  p += "Answer the question using the context below. The context lists section paths, segment summaries and "
       "source segments in document order.\n";
  p += "Question: " + one_line(query) + "\n";
  p += "Context:\n";
  p += std::string(context);
  return p;
}

std::string synthesis_prompt(std::string_view query, const std::vector<LabelledEvidence>& evidence) {
  std::string p = header(task::kAnswer);
  p += "Answer the question by synthesizing the evidence retrieved from each document. Each evidence block keeps "
       "its section paths and source markers.\n";
  p += "Question: " + one_line(query) + "\n";
  p += "Evidence:\n";
  for (const auto& e : evidence) {
    p += "=== " + e.label + " ===\n";
    p += e.context.empty() ? std::string("(no evidence retrieved)\n") : e.context;
    p += "\n";
  }
  return p;
}

// ---------------------------------------------------------------------------

namespace {

std::string stub_relation(std::string_view prompt) {
  std::string first = prompt_field(prompt, "First heading").value_or("");
  std::string second = prompt_field(prompt, "Second heading").value_or("");
  int a = numbering_depth(first);
  int b = numbering_depth(second);
  if (a == 0 || b == 0) return "[0.25, 0.25, 0.25, 0.25]";
  if (b == a + 1) return "[0.9, 0.05, 0.03, 0.02]";
  if (b == a) return "[0.05, 0.9, 0.03, 0.02]";
  if (b == a - 1) return "[0.03, 0.05, 0.9, 0.02]";
  return "[0.25, 0.25, 0.25, 0.25]";
}

std::string stub_alignment(std::string_view prompt) {
  auto q = word_pieces(prompt_field(prompt, "Question").value_or(""));
  auto t = word_pieces(prompt_field(prompt, "Section").value_or(""));
  std::set<std::string> query_terms(q.begin(), q.end());
  std::set<std::string> title_terms(t.begin(), t.end());
  if (title_terms.empty()) return "0";
  std::size_t shared = 0;
  for (const auto& w : title_terms) shared += query_terms.count(w);
  double score = static_cast<double>(shared) / static_cast<double>(title_terms.size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", score);
  return buf;
}

std::string stub_entities(std::string_view prompt) {
  std::string context = prompt_block(prompt, "Context").value_or("");
  std::set<std::string> seen;
  std::string out;
  for (const auto& raw : split_words(context)) {
    std::string w;
    for (char c : raw)
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') w.push_back(c);
    while (!w.empty() && w.back() == '-') w.pop_back();
    if (w.size() < 3 || !std::isupper(static_cast<unsigned char>(w[0]))) continue;
    bool marked = std::any_of(w.begin() + 1, w.end(), [](char c) {
      return std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c));
    });
    if (!marked || !seen.insert(w).second) continue;
    out += w + "\t0.9\n";
  }
  return out;
}

}  // namespace

std::string RuleStubGenerator::generate(std::string_view prompt) {
  std::string_view t = prompt_task(prompt);
  if (t == task::kHeadingRelation) return stub_relation(prompt);
  if (t == task::kSegmentSummary) {
    std::string segment = prompt_block(prompt, "Segment").value_or("");
    return truncate_words(first_sentences(segment, 1), 128);
  }
  if (t == task::kSectionAlignment) return stub_alignment(prompt);
  if (t == task::kQueryDecomposition || t == task::kQueryTransformation)
    return prompt_field(prompt, "Question").value_or("");
  if (t == task::kEntityExtraction) return stub_entities(prompt);
  return std::string(prompt);
}

TaskFaultGenerator::TaskFaultGenerator(std::shared_ptr<TextGenerator> inner, std::vector<std::string> failing_tasks,
                                       bool malformed_instead_of_error)
    : inner_(std::move(inner)), failing_(std::move(failing_tasks)), malformed_(malformed_instead_of_error) {}

std::string TaskFaultGenerator::generate(std::string_view prompt) {
  std::string_view t = prompt_task(prompt);
  if (std::find(failing_.begin(), failing_.end(), t) != failing_.end()) {
    if (malformed_) return "<<garbled reply>>";
    throw BackendError("injected fault for task " + std::string(t));
  }
  return inner_->generate(prompt);
}

}  // namespace ptrag
