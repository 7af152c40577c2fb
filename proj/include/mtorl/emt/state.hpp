#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

#include "mtorl/bench/awcci.hpp"

namespace mtorl::emt {

struct EngineConfig {
  std::size_t population_size = 50;
  std::size_t budget = 250;  ///< G, total generations of a run
  double self_mutation = 0.5;
  double self_crossover = 0.7;
  /// Upper limit accepted for transfer ratios. The no_kc ablation relaxes it to 1.
  double max_transfer_ratio = 0.5;
};

/// One sub-task's population in unified [0,1]^D coordinates.
struct Population {
  RealMatrix positions;  ///< N x D
  RealVector fitness;    ///< N
  double best_value = 0.0;
  RealVector best_position;
  std::size_t stagnation = 0;  ///< generations without a best-so-far improvement
  std::size_t generation = 0;
  bool improved = false;  ///< best-so-far improved in the latest generation

  std::size_t size() const { return static_cast<std::size_t>(positions.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(positions.cols()); }

  /// Index of the lowest fitness (lowest index on ties).
  std::size_t best_index() const {
    Eigen::Index idx = 0;
    fitness.minCoeff(&idx);
    return static_cast<std::size_t>(idx);
  }

  /// Indices sorted by ascending fitness, stable.
  std::vector<std::size_t> ranking() const {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
      return fitness(static_cast<Eigen::Index>(a)) < fitness(static_cast<Eigen::Index>(b));
    });
    return order;
  }
};

struct TransferCount {
  std::size_t transferred = 0;
  std::size_t survived = 0;
};

struct TransferLedger {
  std::vector<TransferCount> current;                ///< latest generation, per task
  std::vector<TransferCount> cumulative;             ///< whole run, per task
  std::vector<std::vector<TransferCount>> history;   ///< [generation][task]

  void reset(std::size_t tasks) {
    current.assign(tasks, {});
    cumulative.assign(tasks, {});
    history.clear();
  }
};

/// Per-task state features, K x 5: diversity, objective spread, stagnation,
/// improvement flag, transfer survival rate.
using StateFeatures = RealMatrix;
inline constexpr Eigen::Index kFeatureCount = 5;

struct EMTState {
  std::shared_ptr<const bench::MTOInstance> instance;
  EngineConfig config;
  std::uint64_t seed = 0;
  std::vector<Population> populations;
  TransferLedger ledger;
  std::vector<double> initial_best;   ///< f_j^0
  std::vector<double> initial_worst;  ///< worst fitness of the initial population
  std::size_t generation = 0;
  std::size_t evaluations = 0;          ///< offspring evaluations made by steps
  std::size_t initial_evaluations = 0;  ///< evaluations spent on initialization

  std::size_t task_count() const { return populations.size(); }

  std::vector<double> best_values() const {
    std::vector<double> out;
    out.reserve(populations.size());
    for (const auto& p : populations) out.push_back(p.best_value);
    return out;
  }

  double optimum(std::size_t task) const { return instance->tasks[task].optimum(); }
};

}  // namespace mtorl::emt
