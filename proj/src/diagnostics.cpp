#include "ptrag/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace ptrag {

using nlohmann::json;

namespace {

double log_in(double x, LogBase base) { return base == LogBase::Two ? std::log2(x) : std::log(x); }

SectionDistribution normalized(std::map<std::string, double> weights, DistributionKind kind) {
  double total = 0.0;
  for (const auto& [_, w] : weights) total += w;
  SectionDistribution d;
  d.kind = kind;
  for (auto& [s, w] : weights)
    if (w > 0.0) d.mass[s] = w / total;
  return d;
}

}  // namespace

double SectionDistribution::at(const std::string& section) const {
  auto it = mass.find(section);
  return it == mass.end() ? 0.0 : it->second;
}

SectionDistribution retrieved_distribution(const std::vector<RetrievedLeaf>& leaves) {
  if (leaves.empty()) throw std::invalid_argument("retrieved_distribution: empty retrieval context");
  std::map<std::string, double> weighted;
  std::map<std::string, double> plain;
  double total = 0.0;
  for (const auto& l : leaves) {
    double w = static_cast<double>(l.token_cost) * std::max(l.score, 0.0);
    weighted[l.section] += w;
    plain[l.section] += static_cast<double>(l.token_cost);
    total += w;
  }
  if (total > 0.0) return normalized(std::move(weighted), DistributionKind::Retrieved);
  spdlog::warn("retrieved distribution: all relevance weights are zero; using plain token fractions");
  return normalized(std::move(plain), DistributionKind::Retrieved);
}

std::vector<RetrievedLeaf> retrieved_leaves(const RetrievalContext& ctx, const std::vector<ScoredSegment>& scores,
                                            const PaperTree& tree) {
  std::map<std::size_t, double> by_leaf;
  for (const auto& s : scores) by_leaf[s.leaf] = s.score;
  std::vector<RetrievedLeaf> out;
  for (auto i : ctx.selected) {
    const auto& leaf = tree.leaves.at(i);
    auto it = by_leaf.find(i);
    out.push_back({leaf.id, tree.outline.nodes.at(leaf.section).id, leaf.token_cost,
                   it == by_leaf.end() ? 0.0 : it->second});
  }
  return out;
}

SectionDistribution ground_truth_distribution(const std::vector<EvidenceSpan>& spans) {
  std::map<std::string, double> weights;
  double total = 0.0;
  for (const auto& s : spans) {
    weights[s.section] += static_cast<double>(s.tokens);
    total += static_cast<double>(s.tokens);
  }
  if (!(total > 0.0)) throw std::invalid_argument("ground_truth_distribution: no evidence tokens");
  return normalized(std::move(weights), DistributionKind::GroundTruth);
}

double section_entropy(const SectionDistribution& r, LogBase base) {
  double h = 0.0;
  for (const auto& [_, p] : r.mass)
    if (p > 0.0) h -= p * log_in(p, base);
  return std::max(h, 0.0);
}

double evidence_alignment_cross_entropy(const SectionDistribution& g, const SectionDistribution& r, double epsilon,
                                        LogBase base) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("evidence_alignment_cross_entropy: epsilon must be positive");
  double h = 0.0;
  for (const auto& [s, p] : g.mass)
    if (p > 0.0) h -= p * log_in(std::max(r.at(s), epsilon), base);
  return h;
}

F1Score evidence_f1(std::string_view retrieved_text, const std::vector<std::string>& gold_spans) {
  std::map<std::string, std::size_t> retrieved;
  std::size_t n_retrieved = 0;
  for (auto& w : split_words(retrieved_text)) {
    ++retrieved[to_lower(w)];
    ++n_retrieved;
  }
  std::map<std::string, std::size_t> gold;
  std::size_t n_gold = 0;
  for (const auto& span : gold_spans)
    for (auto& w : split_words(span)) {
      ++gold[to_lower(w)];
      ++n_gold;
    }
  F1Score s;
  if (n_retrieved == 0 || n_gold == 0) return s;
  std::size_t overlap = 0;
  for (const auto& [w, c] : retrieved) {
    auto it = gold.find(w);
    if (it != gold.end()) overlap += std::min(c, it->second);
  }
  s.precision = static_cast<double>(overlap) / static_cast<double>(n_retrieved);
  s.recall = static_cast<double>(overlap) / static_cast<double>(n_gold);
  if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// ---------------------------------------------------------------------------

std::string trace_to_json_line(const TraceRecord& r) {
  json leaves = json::array();
  for (const auto& l : r.leaves)
    leaves.push_back({{"id", l.leaf_id}, {"section", l.section}, {"token_cost", l.token_cost}, {"score", l.score}});
  json spans = json::array();
  for (const auto& s : r.gold_spans) spans.push_back({{"section", s.section}, {"tokens", s.tokens}});
  json j = {{"query_id", r.query_id},
            {"query", r.query},
            {"selected", r.selected},
            {"leaves", std::move(leaves)},
            {"gold_spans", std::move(spans)},
            {"gold_answer", r.gold_answer},
            {"gold_evidence", r.gold_evidence},
            {"retrieved_text", r.retrieved_text}};
  return j.dump();
}

TraceRecord trace_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("trace record is not valid JSON: ") + e.what());
  }
  auto field = [&](const json& obj, const char* key) -> const json& {
    if (!obj.is_object() || !obj.contains(key))
      throw std::invalid_argument(std::string("trace record: missing field '") + key + "'");
    return obj.at(key);
  };
  auto optional_field = [&](const char* key, json fallback) { return j.contains(key) ? j.at(key) : fallback; };
  try {
    TraceRecord r;
    r.query_id = field(j, "query_id").get<std::string>();
    r.query = optional_field("query", "").get<std::string>();
    r.selected = field(j, "selected").get<std::vector<std::string>>();
    for (const auto& l : field(j, "leaves"))
      r.leaves.push_back({field(l, "id").get<std::string>(), field(l, "section").get<std::string>(),
                          field(l, "token_cost").get<std::size_t>(), field(l, "score").get<double>()});
    for (const auto& s : optional_field("gold_spans", json::array()))
      r.gold_spans.push_back({field(s, "section").get<std::string>(), field(s, "tokens").get<std::size_t>()});
    r.gold_answer = optional_field("gold_answer", "").get<std::string>();
    r.gold_evidence = optional_field("gold_evidence", json::array()).get<std::vector<std::string>>();
    r.retrieved_text = optional_field("retrieved_text", "").get<std::string>();
    return r;
  } catch (const json::type_error& e) {
    throw std::invalid_argument(std::string("trace record: field has the wrong type: ") + e.what());
  }
}

void append_trace(const TraceRecord& record, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot open trace file " + file.string());
  out << trace_to_json_line(record) << '\n';
  if (!out) throw std::runtime_error("error while writing trace file " + file.string());
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file " + file.string());
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(trace_from_json_line(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(file.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

EvalReport evaluate_trace(const std::vector<TraceRecord>& records, LogBase base, double epsilon) {
  EvalReport report;
  double se_sum = 0.0;
  double eace_sum = 0.0;
  double f1_sum = 0.0;
  std::size_t eace_n = 0;
  std::size_t f1_n = 0;
  for (const auto& rec : records) {
    QueryReport q;
    q.query_id = rec.query_id;
    SectionDistribution r;
    if (!rec.leaves.empty()) {
      r = retrieved_distribution(rec.leaves);
      q.section_entropy = section_entropy(r, base);
    }
    bool has_gold = std::any_of(rec.gold_spans.begin(), rec.gold_spans.end(), [](const EvidenceSpan& s) { return s.tokens > 0; });
    if (has_gold) {
      q.eace = evidence_alignment_cross_entropy(ground_truth_distribution(rec.gold_spans), r, epsilon, base);
      eace_sum += *q.eace;
      ++eace_n;
    }
    std::vector<std::string> gold_text = rec.gold_evidence;
    if (gold_text.empty() && !rec.gold_answer.empty()) gold_text.push_back(rec.gold_answer);
    if (!gold_text.empty()) {
      q.f1 = evidence_f1(rec.retrieved_text, gold_text).f1;
      f1_sum += *q.f1;
      ++f1_n;
    }
    se_sum += q.section_entropy;
    report.queries.push_back(std::move(q));
  }
  if (!records.empty()) report.mean_section_entropy = se_sum / static_cast<double>(records.size());
  if (eace_n) report.mean_eace = eace_sum / static_cast<double>(eace_n);
  if (f1_n) report.mean_f1 = f1_sum / static_cast<double>(f1_n);
  return report;
}

namespace {

std::string fixed(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

std::string format_report_text(const EvalReport& report) {
  std::string out = "query_id\tSE\tEACE\tevidence_F1\n";
  for (const auto& q : report.queries)
    out += q.query_id + "\t" + fixed(q.section_entropy) + "\t" + fixed(q.eace) + "\t" + fixed(q.f1) + "\n";
  out += "mean\t" + fixed(report.mean_section_entropy) + "\t" + fixed(report.mean_eace) + "\t" +
         fixed(report.mean_f1) + "\n";
  return out;
}

std::string format_report_json(const EvalReport& report) {
  auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
  json queries = json::array();
  for (const auto& q : report.queries)
    queries.push_back({{"query_id", q.query_id},
                       {"section_entropy", q.section_entropy},
                       {"eace", opt(q.eace)},
                       {"evidence_f1", opt(q.f1)}});
  json j = {{"queries", std::move(queries)},
            {"mean",
             {{"section_entropy", report.mean_section_entropy},
              {"eace", opt(report.mean_eace)},
              {"evidence_f1", opt(report.mean_f1)}}}};
  return j.dump(2) + "\n";
}

}  // namespace ptrag
