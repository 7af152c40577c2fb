#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "mtorl/action.hpp"
#include "mtorl/emt/engine.hpp"

namespace mtorl::emt {

/// One (generation, task) line of a run trace.
struct TraceRow {
  std::size_t generation = 0;
  std::size_t task = 0;
  double best_so_far = 0.0;
  std::array<double, 5> features{};
  std::size_t n_transfer = 0;
  std::size_t n_success = 0;
  std::size_t source_task = 0;
  double transfer_ratio = 0.0;
  int op = 0;
  double mutation = 0.0;
  double crossover = 0.0;
  double reward = 0.0;
};

inline constexpr const char* kTraceHeader =
    "generation,task,best_so_far,s1,s2,s3,s4,s5,n_transfer,n_success,source_task,a2,op_id,F,Cr,reward";

/// Rows for the step that just ran: `features` were observed before the
/// action, best-so-far and transfer counts are read after it.
inline void append_trace(std::vector<TraceRow>& rows, const EMTState& after, const StateFeatures& features,
                         const ActionBundle& action, const RewardBreakdown& reward) {
  for (std::size_t j = 0; j < after.task_count(); ++j) {
    TraceRow r;
    r.generation = after.generation;
    r.task = j;
    r.best_so_far = after.populations[j].best_value;
    for (int f = 0; f < 5; ++f) r.features[static_cast<std::size_t>(f)] = features(static_cast<Eigen::Index>(j), f);
    r.n_transfer = after.ledger.current[j].transferred;
    r.n_success = after.ledger.current[j].survived;
    r.source_task = action.source[j];
    r.transfer_ratio = action.transfer_ratio[j];
    r.op = action.op[j];
    r.mutation = action.mutation[j];
    r.crossover = action.crossover[j];
    r.reward = reward.task_reward(j);
    rows.push_back(r);
  }
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.generation << ',' << r.task << ',' << r.best_so_far;
    for (double s : r.features) out << ',' << s;
    out << ',' << r.n_transfer << ',' << r.n_success << ',' << r.source_task << ',' << r.transfer_ratio << ','
        << r.op << ',' << r.mutation << ',' << r.crossover << ',' << r.reward << '\n';
  }
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write trace " + path);
  write_trace_csv(out, rows);
}

}  // namespace mtorl::emt
