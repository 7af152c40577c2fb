#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mtorl/action.hpp"
#include "mtorl/policy/network.hpp"

namespace mtorl::policy {

enum class ActMode { sample, deterministic };

/// Values that replace a head's output. The head still runs and still
/// consumes its random draws, so the remaining components are unaffected;
/// replaced components contribute nothing to the log-probability. A replaced
/// source routing is what the downstream heads see.
struct ActionOverrides {
  std::optional<std::vector<std::size_t>> source;
  std::optional<std::vector<double>> transfer_ratio;
  std::optional<std::vector<int>> op;
  std::optional<std::vector<double>> mutation;
  std::optional<std::vector<double>> crossover;
};

/// Which action components enter the joint log-probability.
struct ActiveComponents {
  bool source = true;
  bool transfer_ratio = true;
  bool op = true;
  bool mutation = true;
  bool crossover = true;

  static ActiveComponents from(const ActionOverrides& o) {
    return {!o.source, !o.transfer_ratio, !o.op, !o.mutation, !o.crossover};
  }
};

/// Intermediate matrices of one decision, for inspection and export.
struct DecisionContext {
  RealMatrix embedding;  ///< K x 64
  RealMatrix scores;     ///< K x K, pre-softmax
  RealMatrix decision;   ///< K x 64
  RealMatrix concat;     ///< K x 128
  RealMatrix op_probs;   ///< K x 4
};

/// Row-wise softmax over the non-diagonal entries of a square score matrix.
inline RealMatrix routing_probabilities(const RealMatrix& scores) {
  return nn::detail::softmax_values(scores, true);
}

/// Inverse-CDF draw from `probs` with one uniform.
inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last;
}

/// First index of the maximum entry.
inline std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

inline double sample_clamped_gaussian(double mean, double sd, double lo, double hi, Rng& rng) {
  return std::clamp(rng.normal(mean, sd), lo, hi);
}

/// Source task per target. The diagonal is excluded; deterministic mode takes
/// the row argmax (lowest index on ties), sample mode draws from the masked
/// row softmax with task j's stream.
inline std::vector<std::size_t> route(const RealMatrix& scores, ActMode mode, std::span<Rng> streams) {
  const auto k = static_cast<std::size_t>(scores.rows());
  std::vector<std::size_t> a1(k);
  if (mode == ActMode::deterministic) {
    for (std::size_t j = 0; j < k; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t pick = j == 0 ? 1 : 0;
      for (std::size_t c = 0; c < k; ++c) {
        if (c == j) continue;
        const double v = scores(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
        if (v > best) {
          best = v;
          pick = c;
        }
      }
      a1[j] = pick;
    }
    return a1;
  }
  // Candidates are visited in descending-probability order rather than by
  // index, so relabeling the tasks relabels the draws with them.
  const RealMatrix probs = routing_probabilities(scores);
  std::vector<std::size_t> order(k);
  std::vector<double> sorted(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return probs(r, static_cast<Eigen::Index>(x)) > probs(r, static_cast<Eigen::Index>(y));
    });
    for (std::size_t c = 0; c < k; ++c) sorted[c] = probs(r, static_cast<Eigen::Index>(order[c]));
    a1[j] = order[sample_categorical(sorted, streams[j])];
  }
  return a1;
}

/// Joint log-probability of `action` under the heads: masked routing
/// softmax, operator softmax, and Gaussian densities (sd 0.1) at the stored,
/// already clamped continuous values.
inline Var joint_log_prob(Tape& tape, const Trunk& trunk, const Heads& heads, const ActionBundle& action,
                          const ActiveComponents& active = {}) {
  RealMatrix zero = RealMatrix::Zero(1, 1);
  Var total = tape.constant(zero);
  if (active.source) {
    total = nn::add(total, nn::sum(nn::pick(nn::log_softmax_rows(trunk.routing.scores, true), action.source)));
  }
  if (active.op) {
    std::vector<std::size_t> cols(action.op.size());
    for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = static_cast<std::size_t>(action.op[j] - 1);
    total = nn::add(total, nn::sum(nn::pick(nn::log_softmax_rows(heads.op_logits), cols)));
  }
  if (active.transfer_ratio) {
    total = nn::add(total, gaussian_log_density(tape, heads.kc_mean, action.transfer_ratio, kActionStd));
  }
  if (active.mutation) total = nn::add(total, gaussian_log_density(tape, heads.f_mean, action.mutation, kActionStd));
  if (active.crossover) {
    total = nn::add(total, gaussian_log_density(tape, heads.cr_mean, action.crossover, kActionStd));
  }
  return total;
}

/// Entropy of the categorical components (routing and operator), summed over
/// tasks. The Gaussian parts have fixed width and contribute a constant.
inline Var categorical_entropy(const Trunk& trunk, const Heads& heads) {
  return nn::add(nn::sum(nn::row_entropy(trunk.routing.scores, true)), nn::sum(nn::row_entropy(heads.op_logits)));
}

/// Full decision for one generation: embed -> attention routing -> pair
/// concat -> knowledge, operator, F and Cr heads. Sample mode draws with the
/// per-task streams in the order route, a2, op, F, Cr; deterministic mode
/// returns argmaxes and means and never touches the streams.
inline ActionBundle act(const emt::StateFeatures& features, const ParameterSet& params, ActMode mode,
                        std::span<Rng> streams, const ActionOverrides& overrides = {},
                        DecisionContext* context = nullptr) {
  const auto k = static_cast<std::size_t>(features.rows());
  if (mode == ActMode::sample && streams.size() != k) {
    throw ContractError("sample mode needs one random stream per task");
  }
  Tape tape;
  Trunk trunk = forward_trunk(tape, params, features);

  ActionBundle a;
  a.source = route(trunk.routing.scores.value(), mode, streams);
  if (overrides.source) a.source = *overrides.source;
  if (a.source.size() != k) throw ContractError("source override has wrong length");

  Heads heads = forward_heads(tape, params, trunk.routing.decision, a.source);
  const RealMatrix& kc = heads.kc_mean.value();
  const RealMatrix op_probs = nn::detail::softmax_values(heads.op_logits.value(), false);
  const RealMatrix& fm = heads.f_mean.value();
  const RealMatrix& crm = heads.cr_mean.value();

  a.transfer_ratio.resize(k);
  a.op.resize(k);
  a.mutation.resize(k);
  a.crossover.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    a.mu_kc.push_back(kc(r, 0));
    a.mu_f.push_back(fm(r, 0));
    a.mu_cr.push_back(crm(r, 0));
    const double* probs = op_probs.data() + r * op_probs.cols();
    std::span<const double> row(probs, static_cast<std::size_t>(op_probs.cols()));
    if (mode == ActMode::deterministic) {
      a.transfer_ratio[j] = kc(r, 0);
      a.op[j] = static_cast<int>(argmax(row)) + 1;
      a.mutation[j] = fm(r, 0);
      a.crossover[j] = crm(r, 0);
    } else {
      Rng& rng = streams[j];
      a.transfer_ratio[j] = sample_clamped_gaussian(kc(r, 0), kActionStd, 0.0, 0.5, rng);
      a.op[j] = static_cast<int>(sample_categorical(row, rng)) + 1;
      a.mutation[j] = sample_clamped_gaussian(fm(r, 0), kActionStd, 0.0, 1.0, rng);
      a.crossover[j] = sample_clamped_gaussian(crm(r, 0), kActionStd, 0.0, 1.0, rng);
    }
  }
  if (overrides.transfer_ratio) a.transfer_ratio = *overrides.transfer_ratio;
  if (overrides.op) a.op = *overrides.op;
  if (overrides.mutation) a.mutation = *overrides.mutation;
  if (overrides.crossover) a.crossover = *overrides.crossover;

  a.log_prob = joint_log_prob(tape, trunk, heads, a, ActiveComponents::from(overrides)).scalar();

  if (context != nullptr) {
    context->embedding = trunk.embedding.value();
    context->scores = trunk.routing.scores.value();
    context->decision = trunk.routing.decision.value();
    context->concat = heads.concat.value();
    context->op_probs = op_probs;
  }
  return a;
}

/// Scalar state value outside of any training tape.
inline double state_value(const emt::StateFeatures& features, const ParameterSet& params) {
  Tape tape;
  return critic_value(tape, params, tape.constant(features)).scalar();
}

}  // namespace mtorl::policy
