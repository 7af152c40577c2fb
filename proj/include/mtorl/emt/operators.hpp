#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mtorl/emt/state.hpp"
#include "mtorl/rng.hpp"

namespace mtorl::emt {

/// Binomial crossover of `mutant` with `parent`: gene d comes from the mutant
/// when U[0,1) < cr or d == j_rand. Draws j_rand first, then one uniform per
/// gene. The result is clamped to [0,1].
inline RealVector binomial_crossover(const RealVector& mutant, const RealVector& parent, double cr, Rng& rng) {
  const auto d = mutant.size();
  const auto j_rand = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d)));
  RealVector trial(d);
  for (Eigen::Index g = 0; g < d; ++g) {
    const double u = rng.uniform();
    trial(g) = (u < cr || g == j_rand) ? mutant(g) : parent(g);
  }
  return trial.cwiseMax(0.0).cwiseMin(1.0);
}

/// Uniform index in [0, n) not in `taken` (rejection sampling).
inline std::size_t draw_excluding(std::size_t n, std::initializer_list<std::size_t> taken, Rng& rng) {
  for (;;) {
    const std::size_t r = rng.index(n);
    if (std::find(taken.begin(), taken.end(), r) == taken.end()) return r;
  }
}

/// DE/rand/1/bin offspring, one per entry of `parents`:
/// v = x_r1 + F (x_r2 - x_r3) with r1, r2, r3 distinct and different from the
/// parent, followed by binomial crossover with the parent.
inline RealMatrix self_evolve(const Population& pop, std::span<const std::size_t> parents, double f, double cr,
                              Rng& rng) {
  const std::size_t n = pop.size();
  if (n < 4) throw ConfigurationError("DE/rand/1 needs a population of at least 4");
  RealMatrix out(static_cast<Eigen::Index>(parents.size()), pop.positions.cols());
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const std::size_t i = parents[k];
    const std::size_t r1 = draw_excluding(n, {i}, rng);
    const std::size_t r2 = draw_excluding(n, {i, r1}, rng);
    const std::size_t r3 = draw_excluding(n, {i, r1, r2}, rng);
    const auto& x = pop.positions;
    RealVector mutant = (x.row(static_cast<Eigen::Index>(r1)) +
                         f * (x.row(static_cast<Eigen::Index>(r2)) - x.row(static_cast<Eigen::Index>(r3))))
                            .transpose();
    RealVector parent = x.row(static_cast<Eigen::Index>(i)).transpose();
    out.row(static_cast<Eigen::Index>(k)) = binomial_crossover(mutant, parent, cr, rng).transpose();
  }
  return out;
}

struct TransferControl {
  double ratio = 0.0;  ///< a2
  int op = 1;          ///< operator id, 1..4
  double mutation = 0.5;
  double crossover = 0.5;
};

struct TransferOffspring {
  RealMatrix offspring;            ///< count x D
  std::vector<std::size_t> hosts;  ///< target parent paired with each offspring row
  std::size_t count() const { return hosts.size(); }
};

/// round(ratio * N), half-up, capped at N.
inline std::size_t transfer_count(double ratio, std::size_t n) {
  const auto m = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
  return std::min(m, n);
}

namespace detail {
/// `count` positions in the elite list: distinct when the list is long enough,
/// independent draws otherwise.
inline std::vector<std::size_t> draw_elites(std::size_t elite_size, std::size_t count, Rng& rng) {
  if (elite_size >= count) return rng.sample_without_replacement(elite_size, count);
  std::vector<std::size_t> out(count);
  for (auto& e : out) e = rng.index(elite_size);
  return out;
}
}  // namespace detail

/// Cross-task offspring for one target task. Draws m = round(ratio N) host
/// parents uniformly without replacement, takes the m best source individuals
/// as the elite set, and builds one mutant per host from the operator pool:
///   1: x_target,best + F (e_r1 - e_r2)
///   2: x_target,r1   + F (e_r2 - e_r3)
///   3: e_r1          + F (x_target,r2 - x_target,r3)
///   4: x_source,best + F (x_target,r1 - x_target,r2)
/// Target indices are distinct and differ from the host. Each mutant is
/// crossed with its host. m = 0 returns nothing and draws nothing.
inline TransferOffspring transfer_evolve(const Population& target, const Population& source,
                                         const TransferControl& ctl, Rng& rng) {
  TransferOffspring out;
  const std::size_t n = target.size();
  const std::size_t m = transfer_count(ctl.ratio, n);
  out.offspring.resize(static_cast<Eigen::Index>(m), target.positions.cols());
  if (m == 0) return out;
  if (n < 4) throw ConfigurationError("transfer needs a target population of at least 4");

  out.hosts = rng.sample_without_replacement(n, m);
  const std::vector<std::size_t> ranked = source.ranking();
  const std::size_t elite_size = std::min(m, source.size());
  auto elite_row = [&](std::size_t pos) { return source.positions.row(static_cast<Eigen::Index>(ranked[pos])); };
  auto target_row = [&](std::size_t i) { return target.positions.row(static_cast<Eigen::Index>(i)); };
  const std::size_t target_best = target.best_index();

  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t host = out.hosts[k];
    RealVector mutant;
    switch (ctl.op) {
      case 1: {
        auto e = detail::draw_elites(elite_size, 2, rng);
        mutant = (target_row(target_best) + ctl.mutation * (elite_row(e[0]) - elite_row(e[1]))).transpose();
        break;
      }
      case 2: {
        const std::size_t t1 = draw_excluding(n, {host}, rng);
        auto e = detail::draw_elites(elite_size, 2, rng);
        mutant = (target_row(t1) + ctl.mutation * (elite_row(e[0]) - elite_row(e[1]))).transpose();
        break;
      }
      case 3: {
        auto e = detail::draw_elites(elite_size, 1, rng);
        const std::size_t t2 = draw_excluding(n, {host}, rng);
        const std::size_t t3 = draw_excluding(n, {host, t2}, rng);
        mutant = (elite_row(e[0]) + ctl.mutation * (target_row(t2) - target_row(t3))).transpose();
        break;
      }
      case 4: {
        const std::size_t t1 = draw_excluding(n, {host}, rng);
        const std::size_t t2 = draw_excluding(n, {host, t1}, rng);
        mutant = (elite_row(0) + ctl.mutation * (target_row(t1) - target_row(t2))).transpose();
        break;
      }
      default:
        throw ContractError("operator id must be in 1..4");
    }
    RealVector parent = target_row(host).transpose();
    out.offspring.row(static_cast<Eigen::Index>(k)) =
        binomial_crossover(mutant, parent, ctl.crossover, rng).transpose();
  }
  return out;
}

}  // namespace mtorl::emt
