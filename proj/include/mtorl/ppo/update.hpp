#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mtorl/nn/adam.hpp"
#include "mtorl/policy/policy.hpp"
#include "mtorl/ppo/advantage.hpp"

namespace mtorl::ppo {

struct LossTerms {
  nn::Var total;
  nn::Var surrogate;   ///< mean clipped surrogate (to be maximized)
  nn::Var value_loss;  ///< mean squared critic error
  nn::Var entropy;     ///< mean categorical entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::vector<double> ratios;
};

/// total = -surrogate + value_coef * value_loss - entropy_coef * entropy, with
/// log-probabilities re-evaluated on the stored features and actions.
inline LossTerms ppo_loss(nn::Tape& tape, const nn::ParameterSet& params, std::span<const Transition> buffer,
                          const Advantages& adv, const PPOConfig& config) {
  const double n = static_cast<double>(buffer.size());
  LossTerms out;
  RealMatrix zero = RealMatrix::Zero(1, 1);
  nn::Var surrogate = tape.constant(zero);
  nn::Var value_loss = tape.constant(zero);
  nn::Var entropy = tape.constant(zero);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const Transition& t = buffer[i];
    policy::Trunk trunk = policy::forward_trunk(tape, params, t.features);
    policy::Heads heads = policy::forward_heads(tape, params, trunk.routing.decision, t.action.source);
    nn::Var log_prob = policy::joint_log_prob(tape, trunk, heads, t.action);

    RealMatrix old_lp = RealMatrix::Constant(1, 1, t.log_prob);
    nn::Var ratio = nn::exp(nn::sub(log_prob, tape.constant(old_lp)));
    const double a = adv.advantages[i];
    nn::Var unclipped = nn::scale(ratio, a);
    nn::Var clipped_term = nn::scale(nn::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps), a);
    surrogate = nn::add(surrogate, nn::minimum(unclipped, clipped_term));

    const double r = ratio.scalar();
    out.ratios.push_back(r);
    if (std::abs(r - 1.0) > config.clip_eps) ++clipped;
    out.approx_kl += (t.log_prob - log_prob.scalar()) / n;

    nn::Var v = policy::critic_value(tape, params, tape.constant(t.features));
    RealMatrix target = RealMatrix::Constant(1, 1, adv.returns[i]);
    value_loss = nn::add(value_loss, nn::square(nn::sub(v, tape.constant(target))));
    entropy = nn::add(entropy, policy::categorical_entropy(trunk, heads));
  }
  out.surrogate = nn::scale(surrogate, 1.0 / n);
  out.value_loss = nn::scale(value_loss, 1.0 / n);
  out.entropy = nn::scale(entropy, 1.0 / n);
  out.total = nn::add(nn::add(nn::scale(out.surrogate, -1.0), nn::scale(out.value_loss, config.value_coef)),
                      nn::scale(out.entropy, -config.entropy_coef));
  out.clip_fraction = static_cast<double>(clipped) / n;
  return out;
}

struct UpdateStats {
  std::vector<double> total_loss;  ///< per pass, before that pass's step
  double surrogate = 0.0;          ///< first pass
  double value_loss = 0.0;         ///< first pass
  double entropy = 0.0;            ///< first pass
  double clip_fraction = 0.0;      ///< last pass
  double approx_kl = 0.0;          ///< last pass
  std::size_t passes = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// k_ppo full-batch passes of the clipped-surrogate objective, one Adam step
/// each. A non-finite loss stops the update before any parameter changes in
/// that pass.
inline UpdateStats ppo_update(std::span<const Transition> buffer, double bootstrap_value, nn::ParameterSet& params,
                              const PPOConfig& config) {
  const Advantages adv = compute_advantages(buffer, bootstrap_value, config);
  UpdateStats stats;
  for (std::size_t pass = 0; pass < config.k_ppo; ++pass) {
    nn::Tape tape;
    LossTerms loss = ppo_loss(tape, params, buffer, adv, config);
    const double total = loss.total.scalar();
    if (!std::isfinite(total)) {
      stats.aborted = true;
      stats.diagnostic = "non-finite loss (" + std::to_string(total) + ") at pass " + std::to_string(pass) +
                         ": surrogate=" + std::to_string(loss.surrogate.scalar()) +
                         " value_loss=" + std::to_string(loss.value_loss.scalar());
      params.zero_grad();
      return stats;
    }
    if (pass == 0) {
      stats.surrogate = loss.surrogate.scalar();
      stats.value_loss = loss.value_loss.scalar();
      stats.entropy = loss.entropy.scalar();
    }
    stats.total_loss.push_back(total);
    stats.clip_fraction = loss.clip_fraction;
    stats.approx_kl = loss.approx_kl;
    params.zero_grad();
    tape.backward(loss.total, params);
    nn::adam_step(params, config.learning_rate);
    ++stats.passes;
  }
  return stats;
}

}  // namespace mtorl::ppo
