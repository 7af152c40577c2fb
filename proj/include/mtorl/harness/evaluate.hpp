#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mtorl/emt/engine.hpp"
#include "mtorl/harness/ablation.hpp"
#include "mtorl/harness/metrics.hpp"
#include "mtorl/harness/wilcoxon.hpp"

namespace mtorl::harness {

using InstancePtr = std::shared_ptr<const bench::MTOInstance>;

struct EvalConfig {
  emt::EngineConfig engine;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  policy::ActMode mode = policy::ActMode::deterministic;
  bool record_attention = false;
  bool record_actions = false;
};

/// master -> instance (keyed on the id, so adding instances leaves the others
/// alone) -> run.
inline std::uint64_t run_seed(std::uint64_t master, const std::string& instance_id, std::size_t run) {
  return derive_seed(derive_seed(master, hash_text(instance_id)), run);
}

/// One full run of G generations under `controller`.
inline RunTrace run_episode(const InstancePtr& instance, const Controller& controller, const EvalConfig& config,
                            std::uint64_t seed) {
  emt::EMTState state = emt::init_populations(instance, controller.adjust(config.engine), seed);
  const std::size_t k = state.task_count();
  RunTrace trace;
  trace.best.push_back(state.best_values());
  for (std::size_t t = 0; t < config.engine.budget; ++t) {
    emt::StateFeatures features = emt::extract_state(state);
    auto policy_streams = config.mode == policy::ActMode::sample ? make_task_streams(seed, Stream::policy, t, k)
                                                                 : std::vector<Rng>{};
    auto ablation_streams = make_task_streams(seed, Stream::ablation, t, k);
    policy::DecisionContext ctx;
    ActionBundle action = controller.decide(features, config.mode, policy_streams, ablation_streams,
                                            config.record_attention ? &ctx : nullptr);
    emt::emt_step(state, action);
    trace.best.push_back(state.best_values());
    trace.transfers.push_back(state.ledger.current);
    if (config.record_attention) trace.scores.push_back(ctx.scores);
    if (config.record_actions) {
      trace.features.push_back(std::move(features));
      trace.actions.push_back(std::move(action));
    }
  }
  trace.evaluations = state.evaluations;
  return trace;
}

inline std::vector<double> optima(const bench::MTOInstance& inst) {
  std::vector<double> out;
  for (const auto& t : inst.tasks) out.push_back(t.optimum());
  return out;
}

inline EvaluationResult summarize_run(const bench::MTOInstance& inst, std::size_t run_index, std::string variant,
                                      const RunTrace& trace) {
  const auto perf = normalized_perf(std::span<const RunTrace>(&trace, 1), optima(inst));
  EvaluationResult r;
  r.instance_id = inst.id;
  r.run_index = run_index;
  r.variant = std::move(variant);
  r.task_perf = perf.task_perf;
  r.perf = perf.perf;
  r.clamped = perf.clamped;
  r.kt_success_ratio = kt_success_ratio(trace.transfers);
  return r;
}

struct EvaluationOutput {
  std::vector<EvaluationResult> results;  ///< one per (instance, run)
  std::vector<std::vector<RunTrace>> traces;  ///< [instance][run]
};

inline EvaluationOutput evaluate(std::span<const InstancePtr> instances, const Controller& controller,
                                 const EvalConfig& config) {
  EvaluationOutput out;
  const std::string variant(variant_name(controller.variant()));
  for (const InstancePtr& inst : instances) {
    std::vector<RunTrace> runs;
    for (std::size_t r = 0; r < config.runs; ++r) {
      RunTrace trace = run_episode(inst, controller, config, run_seed(config.seed, inst->id, r));
      out.results.push_back(summarize_run(*inst, r, variant, trace));
      runs.push_back(std::move(trace));
    }
    out.traces.push_back(std::move(runs));
  }
  return out;
}

// --- CSV outputs ------------------------------------------------------------

inline constexpr const char* kResultsHeader = "instance_id,run_index,variant,perf,kt_success_ratio,task_perf";

inline void write_results_csv(std::ostream& out, const std::vector<EvaluationResult>& results) {
  out << kResultsHeader << '\n' << std::setprecision(17);
  for (const auto& r : results) {
    out << r.instance_id << ',' << r.run_index << ',' << r.variant << ',' << r.perf << ',' << r.kt_success_ratio << ',';
    for (std::size_t j = 0; j < r.task_perf.size(); ++j) out << (j ? ";" : "") << r.task_perf[j];
    out << '\n';
  }
}

inline constexpr const char* kConvergenceHeader = "instance_id,run_index,generation,task,best_so_far";

inline void write_convergence_csv(std::ostream& out, std::span<const InstancePtr> instances,
                                  const std::vector<std::vector<RunTrace>>& traces) {
  out << kConvergenceHeader << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    for (std::size_t r = 0; r < traces[i].size(); ++r) {
      const auto& best = traces[i][r].best;
      for (std::size_t g = 0; g < best.size(); ++g) {
        for (std::size_t j = 0; j < best[g].size(); ++j) {
          out << instances[i]->id << ',' << r << ',' << g << ',' << j << ',' << best[g][j] << '\n';
        }
      }
    }
  }
}

inline constexpr const char* kAttentionHeader = "generation,target,source,score";

/// Per-generation K x K routing scores with the self entries masked to -inf.
inline void write_attention_csv(std::ostream& out, const std::vector<RealMatrix>& scores) {
  out << kAttentionHeader << '\n' << std::setprecision(17);
  for (std::size_t g = 0; g < scores.size(); ++g) {
    const RealMatrix& s = scores[g];
    for (Eigen::Index j = 0; j < s.rows(); ++j) {
      for (Eigen::Index c = 0; c < s.cols(); ++c) {
        out << g << ',' << j << ',' << c << ',';
        if (j == c) {
          out << "-inf";
        } else {
          out << s(j, c);
        }
        out << '\n';
      }
    }
  }
}

inline std::vector<EvaluationResult> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open results file " + path);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw LoadError(path + ": unexpected results header");
  std::vector<EvaluationResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() < 5) throw LoadError(path + ": malformed row '" + line + "'");
    EvaluationResult r;
    r.instance_id = f[0];
    r.run_index = std::stoul(f[1]);
    r.variant = f[2];
    r.perf = std::stod(f[3]);
    r.kt_success_ratio = std::stod(f[4]);
    if (f.size() > 5) {
      std::stringstream ts(f[5]);
      while (std::getline(ts, field, ';')) r.task_perf.push_back(std::stod(field));
    }
    out.push_back(std::move(r));
  }
  return out;
}

// --- comparison -------------------------------------------------------------

struct InstanceComparison {
  std::string instance_id;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double p_value = 1.0;
  bool tested = false;
  int outcome = 0;  ///< +1 a better (lower perf), -1 b better, 0 tie
};

struct ComparisonSummary {
  std::vector<InstanceComparison> instances;
  int wins = 0;
  int ties = 0;
  int losses = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t pairs = 0;
  bool overall_tested = false;
  WilcoxonResult overall;
};

/// Pairs rows by (instance_id, run_index). Per instance, a significant
/// (p < alpha) Wilcoxon result decides win/loss; everything else is a tie.
inline ComparisonSummary compare_results(const std::vector<EvaluationResult>& a,
                                         const std::vector<EvaluationResult>& b, double alpha = 0.05) {
  std::map<std::pair<std::string, std::size_t>, double> b_index;
  for (const auto& r : b) b_index[{r.instance_id, r.run_index}] = r.perf;

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> grouped;
  std::vector<std::string> order;
  std::vector<double> all_a;
  std::vector<double> all_b;
  for (const auto& r : a) {
    auto it = b_index.find({r.instance_id, r.run_index});
    if (it == b_index.end()) continue;
    if (grouped.find(r.instance_id) == grouped.end()) order.push_back(r.instance_id);
    grouped[r.instance_id].first.push_back(r.perf);
    grouped[r.instance_id].second.push_back(it->second);
    all_a.push_back(r.perf);
    all_b.push_back(it->second);
  }
  ComparisonSummary s;
  s.pairs = all_a.size();
  if (s.pairs == 0) throw InsufficientDataError("compare: no (instance_id, run_index) pairs in common");
  for (std::size_t i = 0; i < s.pairs; ++i) {
    s.mean_a += all_a[i] / static_cast<double>(s.pairs);
    s.mean_b += all_b[i] / static_cast<double>(s.pairs);
  }
  for (const auto& id : order) {
    const auto& [xa, xb] = grouped[id];
    InstanceComparison c;
    c.instance_id = id;
    for (std::size_t i = 0; i < xa.size(); ++i) {
      c.mean_a += xa[i] / static_cast<double>(xa.size());
      c.mean_b += xb[i] / static_cast<double>(xb.size());
    }
    try {
      c.p_value = wilcoxon_signed_rank(xa, xb).p_value;
      c.tested = true;
      if (c.p_value < alpha) c.outcome = c.mean_a < c.mean_b ? 1 : -1;
    } catch (const InsufficientDataError&) {
      c.tested = false;
    }
    if (c.outcome > 0) ++s.wins;
    else if (c.outcome < 0) ++s.losses;
    else ++s.ties;
    s.instances.push_back(c);
  }
  try {
    s.overall = wilcoxon_signed_rank(all_a, all_b);
    s.overall_tested = true;
  } catch (const InsufficientDataError&) {
    s.overall_tested = false;
  }
  return s;
}

inline void write_comparison(std::ostream& out, const ComparisonSummary& s) {
  out << std::setprecision(6);
  out << "pairs: " << s.pairs << '\n';
  out << "mean perf a: " << s.mean_a << "\nmean perf b: " << s.mean_b << '\n';
  out << "win/tie/loss (a vs b): " << s.wins << '/' << s.ties << '/' << s.losses << '\n';
  if (s.overall_tested) {
    out << "overall wilcoxon: W+=" << s.overall.statistic << " z=" << s.overall.z << " p=" << s.overall.p_value
        << " n=" << s.overall.n << '\n';
  } else {
    out << "overall wilcoxon: insufficient data\n";
  }
  out << "instance_id,mean_a,mean_b,p_value,outcome\n";
  for (const auto& c : s.instances) {
    out << c.instance_id << ',' << c.mean_a << ',' << c.mean_b << ',';
    if (c.tested) out << c.p_value;
    else out << "na";
    out << ',' << (c.outcome > 0 ? "win" : c.outcome < 0 ? "loss" : "tie") << '\n';
  }
}

}  // namespace mtorl::harness
