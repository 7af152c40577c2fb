#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "mtorl/action.hpp"
#include "mtorl/emt/operators.hpp"
#include "mtorl/emt/state.hpp"

namespace mtorl::emt {

namespace detail {
inline double evaluate_row(const bench::SubTaskDefinition& task, const RealMatrix& m, Eigen::Index row) {
  const double* p = m.data() + row * m.cols();
  return task.evaluate(std::span<const double>(p, static_cast<std::size_t>(m.cols())));
}
}  // namespace detail

/// Fresh run: N uniform individuals per task, evaluated, with f^0 recorded.
/// Task j draws its positions from the (seed, initialization, 0, j) stream.
inline EMTState init_populations(std::shared_ptr<const bench::MTOInstance> instance, const EngineConfig& config,
                                 std::uint64_t seed) {
  if (!instance) throw ContractError("init_populations: null instance");
  instance->validate();
  if (config.population_size < 4) {
    throw ConfigurationError("population size must be at least 4, got " + std::to_string(config.population_size));
  }
  if (config.budget < 1) throw ConfigurationError("budget must be at least 1 generation");

  EMTState state;
  state.instance = instance;
  state.config = config;
  state.seed = seed;
  const std::size_t k = instance->task_count();
  const auto n = static_cast<Eigen::Index>(config.population_size);
  const auto d = static_cast<Eigen::Index>(instance->dimension());
  for (std::size_t j = 0; j < k; ++j) {
    Rng rng = make_stream(seed, Stream::initialization, 0, j);
    Population pop;
    pop.positions.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index g = 0; g < d; ++g) pop.positions(i, g) = rng.uniform();
    }
    pop.fitness.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) pop.fitness(i) = detail::evaluate_row(instance->tasks[j], pop.positions, i);
    const std::size_t best = pop.best_index();
    pop.best_value = pop.fitness(static_cast<Eigen::Index>(best));
    pop.best_position = pop.positions.row(static_cast<Eigen::Index>(best)).transpose();
    state.initial_best.push_back(pop.best_value);
    state.initial_worst.push_back(pop.fitness.maxCoeff());
    state.initial_evaluations += config.population_size;
    state.populations.push_back(std::move(pop));
  }
  state.ledger.reset(k);
  return state;
}

/// Mean over dimensions of the population standard deviation. Rows are first
/// shifted by row 0 so an all-identical population gives exactly 0.
inline double population_diversity(const Population& pop) {
  const RealMatrix x = pop.positions.rowwise() - pop.positions.row(0);
  RealMatrix centered = x.rowwise() - x.colwise().mean();
  RealMatrix stdev = (centered.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt().matrix();
  return stdev.mean();
}

/// K x 5 state features of the current generation.
inline StateFeatures extract_state(const EMTState& state) {
  const std::size_t k = state.task_count();
  StateFeatures s(static_cast<Eigen::Index>(k), kFeatureCount);
  for (std::size_t j = 0; j < k; ++j) {
    const Population& pop = state.populations[j];
    const auto r = static_cast<Eigen::Index>(j);
    s(r, 0) = std::clamp(population_diversity(pop), 0.0, 1.0);

    const double f_star = state.optimum(j);
    const double span = state.initial_worst[j] - f_star;
    RealVector normalized = RealVector::Zero(pop.fitness.size());
    if (std::abs(span) >= 1e-12) {
      normalized = ((pop.fitness.array() - f_star) / span).cwiseMax(0.0).cwiseMin(1.0).matrix();
    }
    normalized.array() -= normalized(0);
    const double mu = normalized.mean();
    s(r, 1) = std::sqrt((normalized.array() - mu).square().mean());

    s(r, 2) = std::min(1.0, static_cast<double>(pop.stagnation) / static_cast<double>(state.config.budget));
    s(r, 3) = pop.improved ? 1.0 : 0.0;
    const auto& c = state.ledger.current[j];
    s(r, 4) = c.transferred == 0 ? 0.0 : static_cast<double>(c.survived) / static_cast<double>(c.transferred);
  }
  return s;
}

/// Pairwise parent/offspring survival: offspring i replaces parent i when its
/// fitness is <= the parent's. Updates the best-so-far record, the improvement
/// flag and the stagnation counter. Returns how many transfer-origin offspring
/// survived.
inline std::size_t greedy_select(Population& pop, const RealMatrix& offspring, const RealVector& offspring_fitness,
                                 const std::vector<bool>& from_transfer) {
  const std::size_t n = pop.size();
  if (static_cast<std::size_t>(offspring.rows()) != n || static_cast<std::size_t>(offspring_fitness.size()) != n ||
      from_transfer.size() != n) {
    throw DimensionError("greedy_select: one offspring per parent required");
  }
  std::size_t survived = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (offspring_fitness(r) <= pop.fitness(r)) {
      pop.positions.row(r) = offspring.row(r);
      pop.fitness(r) = offspring_fitness(r);
      if (from_transfer[i]) ++survived;
    }
  }
  const std::size_t best = pop.best_index();
  const double candidate = pop.fitness(static_cast<Eigen::Index>(best));
  pop.improved = candidate < pop.best_value;
  if (pop.improved) {
    pop.best_value = candidate;
    pop.best_position = pop.positions.row(static_cast<Eigen::Index>(best)).transpose();
  } else {
    ++pop.stagnation;
  }
  ++pop.generation;
  return survived;
}

struct RewardBreakdown {
  double total = 0.0;
  std::vector<double> convergence;  ///< R_c per task
  std::vector<double> transfer;     ///< R_k per task

  double task_reward(std::size_t j) const { return convergence[j] + transfer[j]; }
};

/// R = sum_j (R_c,j + R_k,j) with R_c,j = (f_j^t - f_j^{t+1}) / (f_j^0 - f_j^*)
/// and R_k,j = survived / transferred. Best-so-far values are floored at f^*
/// so a base function dipping below its nominal optimum cannot push R_c above
/// the full-range improvement of 1.
inline RewardBreakdown compute_reward(std::span<const double> best_before, std::span<const double> best_after,
                                      std::span<const double> initial_best, std::span<const double> optimum,
                                      std::span<const TransferCount> counts) {
  const std::size_t k = best_before.size();
  RewardBreakdown r;
  r.convergence.assign(k, 0.0);
  r.transfer.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double denom = initial_best[j] - optimum[j];
    if (std::abs(denom) >= 1e-12) {
      const double before = std::max(best_before[j], optimum[j]);
      const double after = std::max(best_after[j], optimum[j]);
      r.convergence[j] = (before - after) / denom;
    }
    if (counts[j].transferred > 0) {
      r.transfer[j] = static_cast<double>(counts[j].survived) / static_cast<double>(counts[j].transferred);
    }
    r.total += r.convergence[j] + r.transfer[j];
  }
  return r;
}

/// Advances the run by one generation under `action`. For every task j,
/// round(a2_j N) offspring come from cross-task transfer out of task
/// source_j (hosted by a random subset of parents) and the remaining parents
/// get DE/rand/1/bin offspring. All offspring are built from the
/// pre-selection populations, then evaluated and greedily selected.
inline RewardBreakdown emt_step(EMTState& state, const ActionBundle& action) {
  const std::size_t k = state.task_count();
  validate_action(action, k, state.config.max_transfer_ratio);
  const std::size_t n = state.config.population_size;
  const std::uint64_t gen = state.generation + 1;

  std::vector<RealMatrix> offspring(k);
  std::vector<std::vector<bool>> from_transfer(k, std::vector<bool>(n, false));
  std::vector<std::size_t> transferred(k, 0);

  for (std::size_t j = 0; j < k; ++j) {
    const Population& target = state.populations[j];
    Rng transfer_rng = make_stream(state.seed, Stream::transfer, gen, j);
    TransferControl ctl{action.transfer_ratio[j], action.op[j], action.mutation[j], action.crossover[j]};
    TransferOffspring kt = transfer_evolve(target, state.populations[action.source[j]], ctl, transfer_rng);

    RealMatrix& off = offspring[j];
    off.resize(static_cast<Eigen::Index>(n), target.positions.cols());
    for (std::size_t r = 0; r < kt.count(); ++r) {
      off.row(static_cast<Eigen::Index>(kt.hosts[r])) = kt.offspring.row(static_cast<Eigen::Index>(r));
      from_transfer[j][kt.hosts[r]] = true;
    }
    transferred[j] = kt.count();

    std::vector<std::size_t> parents;
    parents.reserve(n - kt.count());
    for (std::size_t i = 0; i < n; ++i) {
      if (!from_transfer[j][i]) parents.push_back(i);
    }
    Rng self_rng = make_stream(state.seed, Stream::self_evolution, gen, j);
    RealMatrix se = self_evolve(target, parents, state.config.self_mutation, state.config.self_crossover, self_rng);
    for (std::size_t r = 0; r < parents.size(); ++r) {
      off.row(static_cast<Eigen::Index>(parents[r])) = se.row(static_cast<Eigen::Index>(r));
    }
  }

  const std::vector<double> before = state.best_values();
  std::vector<double> optimum(k);
  std::vector<TransferCount> counts(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& task = state.instance->tasks[j];
    RealVector fit(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < fit.size(); ++i) fit(i) = detail::evaluate_row(task, offspring[j], i);
    state.evaluations += n;
    const std::size_t survived = greedy_select(state.populations[j], offspring[j], fit, from_transfer[j]);
    counts[j] = {transferred[j], survived};
    optimum[j] = state.optimum(j);
  }

  state.ledger.current = counts;
  for (std::size_t j = 0; j < k; ++j) {
    state.ledger.cumulative[j].transferred += counts[j].transferred;
    state.ledger.cumulative[j].survived += counts[j].survived;
  }
  state.ledger.history.push_back(counts);
  ++state.generation;

  const std::vector<double> after = state.best_values();
  return compute_reward(before, after, state.initial_best, optimum, counts);
}

}  // namespace mtorl::emt
