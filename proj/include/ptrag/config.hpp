#pragma once
// Run-time knobs for indexing and retrieval, with their defaults.

#include <cstddef>
#include <string>

namespace ptrag {

enum class LogBase { Natural, Two };

struct RetrievalConfig {
  double alpha = 0.5;          // section fusion: alignment vs embedding
  double beta = 0.8;           // segment fusion: raw vs summary channel
  std::size_t sections = 2;    // B, sections kept as retrieval scope
  std::size_t paths = 3;       // P, root-to-leaf paths kept
  std::size_t budget = 1024;   // T, token budget over selected segments
  bool rerank = false;
  std::size_t rerank_k = 20;
  /// Charge summary tokens against the budget in addition to raw segment cost.
  bool count_summary_cost = false;

  /// Throws std::invalid_argument naming the offending knob.
  void validate() const;
};

struct MultihopConfig {
  int hops = 3;                   // H
  double entity_threshold = 0.5;  // tau_ent
};

}  // namespace ptrag
