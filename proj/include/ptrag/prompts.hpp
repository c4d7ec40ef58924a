#pragma once
// Prompt construction and reply parsing for every language-model task the
// engine issues. Each prompt starts with a `### TASK <name>` line so stubs and
// fault injectors can dispatch on the task without parsing free text.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptrag/backends.hpp"

namespace ptrag {

namespace task {
inline constexpr std::string_view kHeadingRelation = "heading-relation";
inline constexpr std::string_view kSegmentSummary = "segment-summary";
inline constexpr std::string_view kSectionAlignment = "section-alignment";
inline constexpr std::string_view kQueryDecomposition = "query-decomposition";
inline constexpr std::string_view kEntityExtraction = "entity-extraction";
inline constexpr std::string_view kQueryTransformation = "query-transformation";
inline constexpr std::string_view kAnswer = "answer";
}  // namespace task

/// Literal passed as the previous summary for the first segment of a section.
inline constexpr std::string_view kSectionStartToken = "<SECTION-START>";

/// Task name from the first prompt line, or empty if the prompt is untagged.
std::string_view prompt_task(std::string_view prompt);

/// Value of the first `Label: value` line in a prompt.
std::optional<std::string> prompt_field(std::string_view prompt, std::string_view label);

/// Everything after the first line equal to `Label:`.
std::optional<std::string> prompt_block(std::string_view prompt, std::string_view label);

std::string heading_relation_prompt(std::string_view first_heading, std::string_view first_context,
                                    std::string_view second_heading, std::string_view second_context);

/// Four non-negative numbers (brackets, commas and whitespace allowed as
/// separators, nothing else), normalized to sum to one. nullopt on any
/// deviation from that shape.
std::optional<std::array<double, 4>> parse_relation_reply(std::string_view reply);

/// The four conditioning signals appear in this fixed order: document title,
/// hierarchical path, previous summary, segment.
std::string segment_summary_prompt(std::string_view doc_title, const std::vector<std::string>& path,
                                   std::string_view previous_summary, std::string_view segment);

std::string section_alignment_prompt(std::string_view query, std::string_view section_title,
                                     const std::vector<std::string>& path);

/// A single number in [0, 1], or nullopt.
std::optional<double> parse_unit_score(std::string_view reply);

std::string query_decomposition_prompt(std::string_view query, int max_subqueries);

/// Non-empty reply lines with list markers ("1.", "-", "*", "Q1:") stripped.
std::vector<std::string> parse_subquery_lines(std::string_view reply);

std::string entity_extraction_prompt(std::string_view context, std::string_view next_query);

struct ScoredEntity {
  std::string name;
  double confidence = 0.0;
};

/// Lines of the form `entity<TAB>confidence` or `entity | confidence`.
/// nullopt when no line parses.
std::optional<std::vector<ScoredEntity>> parse_entity_reply(std::string_view reply);

std::string query_transformation_prompt(std::string_view query);

std::string answer_prompt(std::string_view query, std::string_view context);

struct LabelledEvidence {
  std::string label;  // e.g. "Document 2: <title>"
  std::string context;
};

/// Original question plus every document's evidence under its own label.
std::string synthesis_prompt(std::string_view query, const std::vector<LabelledEvidence>& evidence);

/// Offline stand-in for a language model: answers each tagged task with a
/// fixed rule (numbering-prefix heading relations, first-sentence summaries,
/// title-overlap alignment, identity decomposition and transformation,
/// capitalized-term entities). Untagged prompts are echoed.
class RuleStubGenerator final : public TextGenerator {
 public:
  std::string generate(std::string_view prompt) override;
};

/// Wraps another generator and fails every prompt of the listed tasks.
class TaskFaultGenerator final : public TextGenerator {
 public:
  TaskFaultGenerator(std::shared_ptr<TextGenerator> inner, std::vector<std::string> failing_tasks,
                     bool malformed_instead_of_error = false);
  std::string generate(std::string_view prompt) override;

 private:
  std::shared_ptr<TextGenerator> inner_;
  std::vector<std::string> failing_;
  bool malformed_;
};

}  // namespace ptrag
