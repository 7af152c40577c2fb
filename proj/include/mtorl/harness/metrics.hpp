#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mtorl/action.hpp"
#include "mtorl/emt/state.hpp"

namespace mtorl::harness {

/// Everything recorded during one evaluation run.
struct RunTrace {
  std::vector<std::vector<double>> best;  ///< [generation 0..G][task] best-so-far
  std::vector<std::vector<emt::TransferCount>> transfers;  ///< [generation][task]
  std::vector<emt::StateFeatures> features;  ///< observed before each action
  std::vector<ActionBundle> actions;
  std::vector<RealMatrix> scores;  ///< attention scores per generation, when recorded
  std::size_t evaluations = 0;
};

struct PerfSummary {
  std::vector<double> task_perf;
  double perf = 0.0;
  bool clamped = false;  ///< some raw ratio fell outside [0,1]
};

/// Normalized objective per task averaged over runs:
/// perf_j = mean_i (f^G - f^*) / (f^0 - f^*), clamped to [0,1]. A degenerate
/// normalizer (< 1e-12) counts as 0 when f^G == f^* and 1 otherwise.
inline PerfSummary normalized_perf(std::span<const RunTrace> runs, std::span<const double> optimum) {
  PerfSummary out;
  if (runs.empty()) return out;
  const std::size_t k = optimum.size();
  out.task_perf.assign(k, 0.0);
  for (const RunTrace& run : runs) {
    if (run.best.empty() || run.best.front().size() != k) throw DimensionError("normalized_perf: trace shape mismatch");
    for (std::size_t j = 0; j < k; ++j) {
      const double f0 = run.best.front()[j];
      const double fg = run.best.back()[j];
      const double denom = f0 - optimum[j];
      double ratio = 0.0;
      if (std::abs(denom) < 1e-12) {
        ratio = fg == optimum[j] ? 0.0 : 1.0;
      } else {
        ratio = (fg - optimum[j]) / denom;
      }
      if (ratio < 0.0 || ratio > 1.0) out.clamped = true;
      out.task_perf[j] += std::clamp(ratio, 0.0, 1.0);
    }
  }
  for (double& p : out.task_perf) p /= static_cast<double>(runs.size());
  double total = 0.0;
  for (double p : out.task_perf) total += p;
  out.perf = total / static_cast<double>(k);
  return out;
}

/// Per-generation survival ratio of transferred offspring (pooled over tasks),
/// averaged over the generations that transferred anything. 0 when nothing
/// was ever transferred.
inline double kt_success_ratio(const std::vector<std::vector<emt::TransferCount>>& history) {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& generation : history) {
    std::size_t transferred = 0;
    std::size_t survived = 0;
    for (const auto& c : generation) {
      transferred += c.transferred;
      survived += c.survived;
    }
    if (transferred == 0) continue;
    sum += static_cast<double>(survived) / static_cast<double>(transferred);
    ++used;
  }
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

struct EvaluationResult {
  std::string instance_id;
  std::size_t run_index = 0;
  std::string variant;
  std::vector<double> task_perf;
  double perf = 0.0;
  double kt_success_ratio = 0.0;
  bool clamped = false;
};

}  // namespace mtorl::harness
