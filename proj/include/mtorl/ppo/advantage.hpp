#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mtorl/action.hpp"
#include "mtorl/emt/state.hpp"
#include "mtorl/ppo/config.hpp"

namespace mtorl::ppo {

struct Transition {
  emt::StateFeatures features;
  ActionBundle action;
  double log_prob = 0.0;  ///< log-probability under the acting policy
  double reward = 0.0;
  double value = 0.0;     ///< critic estimate at `features`
  bool done = false;
};

struct Advantages {
  std::vector<double> advantages;  ///< normalized when enabled and length >= 2
  std::vector<double> returns;     ///< raw advantage + value
};

/// Generalized advantage estimation over one contiguous segment, bootstrapped
/// with the critic value of the state after the last transition (ignored when
/// that transition is terminal).
inline Advantages compute_advantages(std::span<const Transition> buffer, double bootstrap_value,
                                     const PPOConfig& config) {
  if (buffer.empty()) throw ContractError("compute_advantages: empty buffer");
  const std::size_t n = buffer.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = bootstrap_value;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const Transition& t = buffer[i];
    const double live = t.done ? 0.0 : 1.0;
    const double delta = t.reward + config.gamma * next_value * live - t.value;
    running = delta + config.gamma * config.gae_lambda * live * running;
    out.advantages[i] = running;
    out.returns[i] = running + t.value;
    next_value = t.value;
  }
  if (config.normalize_advantages && n >= 2) {
    double mean = 0.0;
    for (double a : out.advantages) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : out.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    for (double& a : out.advantages) a = sd > 0.0 ? (a - mean) / sd : 0.0;
  }
  return out;
}

}  // namespace mtorl::ppo
