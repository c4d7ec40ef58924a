#pragma once
// Entropy diagnostics over section-level token distributions, token-level
// evidence F1, and the per-query trace records the evaluation tool reads.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptrag/config.hpp"
#include "ptrag/retrieval.hpp"
#include "ptrag/tree.hpp"

namespace ptrag {

enum class DistributionKind { Retrieved, GroundTruth };

/// Probability mass per section id. Only sections with positive mass are
/// stored; masses sum to one.
struct SectionDistribution {
  std::map<std::string, double> mass;
  DistributionKind kind = DistributionKind::Retrieved;

  double at(const std::string& section) const;
};

/// One retrieved leaf as seen by the diagnostics.
struct RetrievedLeaf {
  std::string leaf_id;
  std::string section;
  std::size_t token_cost = 0;
  double score = 0.0;

  bool operator==(const RetrievedLeaf&) const = default;
};

struct EvidenceSpan {
  std::string section;
  std::size_t tokens = 0;

  bool operator==(const EvidenceSpan&) const = default;
};

/// Mass of a section = sum over its retrieved leaves of cost * max(score, 0),
/// normalized. If every weight is zero the plain token fractions are used.
/// Throws std::invalid_argument for an empty selection.
SectionDistribution retrieved_distribution(const std::vector<RetrievedLeaf>& leaves);

/// Adapter over a retrieval result: leaves grouped by their owning outline
/// node id.
std::vector<RetrievedLeaf> retrieved_leaves(const RetrievalContext& ctx, const std::vector<ScoredSegment>& scores,
                                            const PaperTree& tree);

/// Mass proportional to annotated evidence tokens; zero-token spans are
/// dropped. Throws std::invalid_argument when no span has tokens.
SectionDistribution ground_truth_distribution(const std::vector<EvidenceSpan>& spans);

double section_entropy(const SectionDistribution& r, LogBase base = LogBase::Natural);

/// -sum g(s) log max(r(s), epsilon). Throws for epsilon <= 0.
double evidence_alignment_cross_entropy(const SectionDistribution& g, const SectionDistribution& r,
                                        double epsilon = 1e-12, LogBase base = LogBase::Natural);

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Multiset overlap of lowercased whitespace tokens between the retrieved
/// text and the concatenated gold spans.
F1Score evidence_f1(std::string_view retrieved_text, const std::vector<std::string>& gold_spans);

// ---------------------------------------------------------------------------
// Trace records (one JSON object per line)

struct TraceRecord {
  std::string query_id;
  std::string query;
  std::vector<std::string> selected;  // leaf ids
  std::vector<RetrievedLeaf> leaves;
  std::vector<EvidenceSpan> gold_spans;
  std::string gold_answer;
  std::vector<std::string> gold_evidence;  // gold evidence passages, when annotated
  std::string retrieved_text;

  bool operator==(const TraceRecord&) const = default;
};

std::string trace_to_json_line(const TraceRecord& record);
/// Throws std::invalid_argument naming the missing or mistyped field.
TraceRecord trace_from_json_line(std::string_view line);

void append_trace(const TraceRecord& record, const std::filesystem::path& file);
/// Blank lines are skipped; a malformed line throws with its line number.
std::vector<TraceRecord> read_trace(const std::filesystem::path& file);

struct QueryReport {
  std::string query_id;
  double section_entropy = 0.0;
  std::optional<double> eace;  // absent without gold spans
  std::optional<double> f1;    // absent without gold text
};

struct EvalReport {
  std::vector<QueryReport> queries;
  double mean_section_entropy = 0.0;
  std::optional<double> mean_eace;
  std::optional<double> mean_f1;
};

/// Records with no retrieved leaves are reported with entropy 0.
EvalReport evaluate_trace(const std::vector<TraceRecord>& records, LogBase base = LogBase::Natural,
                          double epsilon = 1e-12);

std::string format_report_text(const EvalReport& report);
std::string format_report_json(const EvalReport& report);

}  // namespace ptrag
