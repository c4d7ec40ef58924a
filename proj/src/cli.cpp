#include "ptrag/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ptrag/diagnostics.hpp"
#include "ptrag/multihop.hpp"
#include "ptrag/prompts.hpp"
#include "ptrag/retrieval.hpp"
#include "ptrag/tree.hpp"

namespace ptrag {

namespace {

constexpr std::size_t kStubEmbeddingDim = 256;

struct RunConfig {
  RetrievalConfig retrieval;
  MultihopConfig multihop;
  std::size_t segment_cap = 512;
  std::string log_base = "e";
  bool stub = false;
  bool live = false;

  void validate() const {
    retrieval.validate();
    if (multihop.hops < 1) throw std::invalid_argument("hops (H) must be at least 1");
    if (multihop.entity_threshold < 0.0 || multihop.entity_threshold > 1.0)
      throw std::invalid_argument("entity threshold must lie in [0, 1]");
    if (segment_cap < 16) throw std::invalid_argument("segment cap (M) must be at least 16");
    if (log_base != "e" && log_base != "2") throw std::invalid_argument("log base must be 'e' or '2'");
    if (stub && live) throw std::invalid_argument("--stub and --live are mutually exclusive");
  }
  LogBase base() const { return log_base == "2" ? LogBase::Two : LogBase::Natural; }
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Backends stub_backends() {
  return {std::make_shared<RuleStubGenerator>(), std::make_shared<HashEmbedder>(kStubEmbeddingDim),
          std::make_shared<OverlapReranker>()};
}

Backends make_backends(const RunConfig& cfg) {
  auto llm = backend_config_from_env("LLM");
  bool live = cfg.live || (!cfg.stub && llm.has_value());
  if (!live) return stub_backends();
  if (!llm) throw UsageError("--live needs PTRAG_LLM_ENDPOINT");
  auto embed = backend_config_from_env("EMBED");
  if (!embed) throw UsageError("live mode needs PTRAG_EMBED_ENDPOINT");
  llm->validate();
  embed->validate();
  Backends b{std::make_shared<HttpGenerator>(*llm), std::make_shared<HttpEmbedder>(*embed), nullptr};
  if (auto rr = backend_config_from_env("RERANK")) {
    rr->validate();
    b.reranker = std::make_shared<HttpReranker>(*rr);
  }
  return b;
}

std::string query_id(std::string_view query) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "q%016llx", static_cast<unsigned long long>(fnv1a64(query)));
  return buf;
}

// "S3:40" -> {S3, 40}
EvidenceSpan parse_gold_span(const std::string& arg) {
  auto colon = arg.rfind(':');
  if (colon == std::string::npos || colon == 0) throw UsageError("gold span must look like SECTION:TOKENS, got " + arg);
  char* end = nullptr;
  auto tokens = std::strtoull(arg.c_str() + colon + 1, &end, 10);
  if (*end != '\0' || colon + 1 == arg.size()) throw UsageError("gold span token count is not a number: " + arg);
  return {arg.substr(0, colon), static_cast<std::size_t>(tokens)};
}

std::string answer_or_prompt(TextGenerator& llm, const std::string& prompt) {
  try {
    return llm.generate(prompt);
  } catch (const BackendError& e) {
    spdlog::warn("answer generation failed ({}); printing the prompt instead", e.what());
    return prompt;
  }
}

std::vector<RetrievedLeaf> leaves_from_values(const RetrievalContext& ctx, const LeafValues& values,
                                              const PaperTree& tree) {
  std::vector<RetrievedLeaf> out;
  for (auto i : ctx.selected) {
    const auto& leaf = tree.leaves.at(i);
    auto it = values.find(i);
    out.push_back({leaf.id, tree.outline.nodes.at(leaf.section).id, leaf.token_cost,
                   it == values.end() ? 0.0 : it->second.score});
  }
  return out;
}

int cmd_index(const std::string& input, const std::string& output, const RunConfig& cfg, std::ostream& out) {
  IndexConfig ic;
  ic.segment_cap = cfg.segment_cap;
  PaperTree tree = build_index_from_file(input, ic, make_backends(cfg));
  save_index(tree, output);
  out << tree.section_count() << " sections, " << tree.leaves.size() << " leaves\n";
  return exit_code::kOk;
}

struct QueryArgs {
  std::vector<std::string> indexes;
  std::string question;
  bool multihop = false;
  bool multidoc = false;
  std::string trace;
  std::vector<std::string> gold_spans;
  std::vector<std::string> gold_evidence;
  std::string gold_answer;
};

int cmd_query(const QueryArgs& q, const RunConfig& cfg, std::ostream& out) {
  if (trim(q.question).empty()) {
    spdlog::error("empty question");
    return exit_code::kDegenerate;
  }
  if (q.multidoc && q.multihop) throw UsageError("--multihop and --multidoc cannot be combined");
  if (!q.multidoc && q.indexes.size() > 1) throw UsageError("several indexes need --multidoc");
  if (cfg.retrieval.budget == 0) spdlog::warn("token budget is zero; the context will be empty");

  std::vector<PaperTree> trees;
  for (const auto& path : q.indexes) trees.push_back(load_index(path));
  Backends backends = make_backends(cfg);
  if (cfg.retrieval.rerank && !backends.reranker) spdlog::warn("no reranker configured; --rerank ignored");

  TraceRecord rec;
  rec.query_id = query_id(q.question);
  rec.query = q.question;
  for (const auto& s : q.gold_spans) rec.gold_spans.push_back(parse_gold_span(s));
  rec.gold_evidence = q.gold_evidence;
  rec.gold_answer = q.gold_answer;

  std::string prompt;
  if (q.multidoc) {
    std::vector<const PaperTree*> ptrs;
    for (const auto& t : trees) ptrs.push_back(&t);
    MultidocResult r = run_multidoc(q.question, ptrs, cfg.retrieval, backends);
    for (std::size_t d = 0; d < r.documents.size(); ++d) {
      const auto& doc = r.documents[d];
      std::string prefix = "D" + std::to_string(d + 1) + "/";
      for (auto leaf : retrieved_leaves(doc.retrieval.context, doc.retrieval.segments, trees[d])) {
        leaf.leaf_id = prefix + leaf.leaf_id;
        leaf.section = prefix + leaf.section;
        rec.selected.push_back(leaf.leaf_id);
        rec.leaves.push_back(std::move(leaf));
      }
      if (!doc.context.empty()) rec.retrieved_text += (rec.retrieved_text.empty() ? "" : "\n\n") + doc.context;
    }
    prompt = r.synthesis_prompt;
  } else {
    const PaperTree& tree = trees.front();
    RetrievalContext ctx;
    if (q.multihop) {
      MultihopResult r = run_multihop(q.question, tree, cfg.retrieval, cfg.multihop, backends);
      rec.leaves = leaves_from_values(r.context, r.values, tree);
      ctx = std::move(r.context);
    } else {
      RetrievalResult r = retrieve(q.question, tree, cfg.retrieval, backends);
      rec.leaves = retrieved_leaves(r.context, r.segments, tree);
      ctx = std::move(r.context);
    }
    for (const auto& l : rec.leaves) rec.selected.push_back(l.leaf_id);
    rec.retrieved_text = assemble_context(ctx, tree);
    prompt = answer_prompt(q.question, rec.retrieved_text);
  }

  std::string answer = answer_or_prompt(*backends.llm, prompt);
  out << answer;
  if (!answer.empty() && answer.back() != '\n') out << '\n';
  std::string trace = q.trace.empty() ? q.indexes.front() + ".trace.jsonl" : q.trace;
  append_trace(rec, trace);
  return exit_code::kOk;
}

int cmd_eval(const std::string& trace, bool json_out, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto records = read_trace(trace);
  if (records.empty()) {
    err << "ptrag: " << trace << ": no records\n";
    return exit_code::kDegenerate;
  }
  EvalReport report = evaluate_trace(records, cfg.base());
  out << (json_out ? format_report_json(report) : format_report_text(report));
  return exit_code::kOk;
}

int cmd_inspect(const std::string& index, std::ostream& out) {
  PaperTree tree = load_index(index);
  out << "title: " << tree.doc_title << "\n";
  out << tree.section_count() << " sections, " << tree.leaves.size() << " leaves";
  if (tree.outline.synthetic_root) out << " (no headings found)";
  out << "\n";
  for (std::size_t n = 0; n < tree.outline.nodes.size(); ++n) {
    const auto& node = tree.outline.nodes[n];
    const auto& range = tree.section_index.at(n);
    std::size_t tokens = 0;
    for (auto i = range.begin; i < range.end; ++i) tokens += tree.leaves[i].token_cost;
    out << std::string(static_cast<std::size_t>(node.depth) * 2, ' ') << node.id << "  " << node.title << "  ["
        << range.size() << " leaves, " << tokens << " tokens]\n";
  }
  std::size_t over = 0;
  std::size_t fallback = 0;
  for (const auto& l : tree.leaves) {
    over += l.over_cap;
    fallback += l.summary_fallback;
  }
  out << "over-cap leaves: " << over << ", fallback summaries: " << fallback << "\n";
  return exit_code::kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  // Standard output carries only command results.
  if (!spdlog::get("ptrag")) spdlog::set_default_logger(spdlog::stderr_color_mt("ptrag"));
  RunConfig cfg;
  CLI::App app{"Structure-aware retrieval over long Markdown documents", "ptrag"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file with option defaults (keys as the long option names)");

  const char* ref = "reference configuration";
  const char* eng = "engineering choice";
  auto knob = [&](const std::string& what, const char* provenance) {
    return what + " [default provenance: " + provenance + "]";
  };
  app.add_option("--alpha", cfg.retrieval.alpha, knob("section fusion weight on the alignment score", ref))
      ->capture_default_str();
  app.add_option("--beta", cfg.retrieval.beta, knob("segment fusion weight on the raw-text channel", ref))
      ->capture_default_str();
  app.add_option("--sections", cfg.retrieval.sections, knob("sections kept per query (B)", ref))->capture_default_str();
  app.add_option("--paths", cfg.retrieval.paths, knob("root-to-leaf paths kept (P)", ref))->capture_default_str();
  app.add_option("--hops", cfg.multihop.hops, knob("maximum multi-hop subqueries (H)", ref))->capture_default_str();
  app.add_option("--entity-threshold", cfg.multihop.entity_threshold,
                 knob("minimum entity confidence for feedback", eng))
      ->capture_default_str();
  app.add_option("--segment-cap", cfg.segment_cap, knob("maximum tokens per leaf segment (M)", ref))
      ->capture_default_str();
  app.add_option("--budget", cfg.retrieval.budget, knob("token budget for retrieved segments (T)", eng))
      ->capture_default_str();
  app.add_option("--log-base", cfg.log_base, knob("logarithm base for entropies", eng))
      ->check(CLI::IsMember({"e", "2"}))
      ->capture_default_str();
  app.add_flag("--rerank", cfg.retrieval.rerank, knob("rerank candidate segments before path selection", eng));
  app.add_flag("--stub", cfg.stub, "use deterministic offline backends (default without PTRAG_LLM_ENDPOINT)");
  app.add_flag("--live", cfg.live, "use the HTTP backends configured through PTRAG_* variables");

  std::string input;
  std::string output;
  auto* index = app.add_subcommand("index", "build an index from a Markdown file");
  index->add_option("input", input, "Markdown document")->required();
  index->add_option("output", output, "index file to write")->required();

  QueryArgs q;
  auto* query = app.add_subcommand("query", "retrieve context for a question and print the answer");
  query->add_option("-i,--index", q.indexes, "index file (repeat with --multidoc)")->required()->allow_extra_args(false);
  query->add_option("question", q.question, "the question")->required();
  query->add_flag("--multihop", q.multihop, "decompose the question and retrieve hop by hop");
  query->add_flag("--multidoc", q.multidoc, "retrieve across every given index");
  query->add_option("--trace", q.trace, "trace file to append to (default: <first index>.trace.jsonl)");
  query->add_option("--gold-span", q.gold_spans, "annotated evidence as SECTION:TOKENS, for eval")->allow_extra_args(false);
  query->add_option("--gold-evidence", q.gold_evidence, "annotated evidence passage, for eval")->allow_extra_args(false);
  query->add_option("--gold-answer", q.gold_answer, "reference answer, for eval");

  std::string trace;
  bool json_out = false;
  auto* eval = app.add_subcommand("eval", "report section entropy, EACE and evidence F1 for a trace file");
  eval->add_option("trace", trace, "trace file")->required();
  eval->add_flag("--json", json_out, "machine-readable report");

  std::string inspect_index;
  auto* inspect = app.add_subcommand("inspect", "print the outline and leaf statistics of an index");
  inspect->add_option("index", inspect_index, "index file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "ptrag: " << e.what() << "\n";
    return exit_code::kIoOrConfig;
  }

  try {
    cfg.validate();
    if (index->parsed()) return cmd_index(input, output, cfg, out);
    if (query->parsed()) return cmd_query(q, cfg, out);
    if (eval->parsed()) return cmd_eval(trace, json_out, cfg, out, err);
    if (inspect->parsed()) return cmd_inspect(inspect_index, out);
  } catch (const std::exception& e) {
    err << "ptrag: " << e.what() << "\n";
    return exit_code::kIoOrConfig;
  }
  return exit_code::kIoOrConfig;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ptrag
