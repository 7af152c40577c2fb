#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mtorl/emt/state.hpp"
#include "mtorl/nn/ops.hpp"
#include "mtorl/nn/parameters.hpp"

namespace mtorl::policy {

using nn::ParameterSet;
using nn::Tape;
using nn::Var;

inline constexpr Eigen::Index kEmbedWidth = 64;
inline constexpr Eigen::Index kHeadHidden = 64;
inline constexpr double kActionStd = 0.1;

/// Embedder, routing attention block, the four decision heads and the critic.
inline ParameterSet make_policy_parameters(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet p;
  p.add_dense("embed", emt::kFeatureCount, kEmbedWidth, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(kEmbedWidth));
  for (const char* name : {"attn.query", "attn.key", "attn.value"}) {
    auto& w = p.add(name, kEmbedWidth, kEmbedWidth);
    for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.uniform(-bound, bound);
  }
  p.add("norm.scale", 1, kEmbedWidth).value.setOnes();
  p.add("norm.shift", 1, kEmbedWidth);
  for (const char* head : {"kc", "op", "f", "cr"}) {
    p.add_dense(std::string(head) + ".hidden", 2 * kEmbedWidth, kHeadHidden, rng);
    p.add_dense(std::string(head) + ".out", kHeadHidden, head == std::string("op") ? 4 : 1, rng);
  }
  p.add_dense("critic.hidden", kEmbedWidth, kHeadHidden, rng);
  p.add_dense("critic.out", kHeadHidden, 1, rng);
  return p;
}

/// Shared per-task linear map R^5 -> R^64.
inline Var embed(Tape& tape, const ParameterSet& params, const Var& features) {
  return nn::dense(tape, params, "embed", features);
}

struct RoutingOutput {
  Var scores;    ///< K x K attention scores before softmax
  Var decision;  ///< K x 64, batch-normalized attention output
};

inline RoutingOutput tr_forward(Tape& tape, const ParameterSet& params, const Var& embedding) {
  auto attn = nn::single_head_attention(tape, params, "attn", embedding);
  return {attn.scores, nn::batch_norm(tape, params, "norm", attn.output)};
}

/// Row j = [decision_j | decision_{source_j}], K x 128.
inline Var pair_concat(const Var& decision, std::span<const std::size_t> source) {
  return nn::concat_cols(decision, nn::gather_rows(decision, source));
}

/// Two-layer MLP, ReLU hidden layer.
inline Var head_mlp(Tape& tape, const ParameterSet& params, const std::string& head, const Var& x) {
  return nn::dense(tape, params, head + ".out", nn::relu(nn::dense(tape, params, head + ".hidden", x)));
}

/// mu_kc = 0.25 + 0.25 tanh(MLP), inside [0, 0.5].
inline Var kc_mean(Tape& tape, const ParameterSet& params, const Var& concat) {
  return nn::affine(nn::tanh(head_mlp(tape, params, "kc", concat)), 0.25, 0.25);
}

/// Operator logits (ReLU output layer); probabilities are their row softmax.
inline Var op_logits(Tape& tape, const ParameterSet& params, const Var& concat) {
  return nn::relu(head_mlp(tape, params, "op", concat));
}

/// mu = 0.5 + 0.5 tanh(MLP), inside [0, 1]; `head` is "f" or "cr".
inline Var unit_mean(Tape& tape, const ParameterSet& params, const std::string& head, const Var& concat) {
  return nn::affine(nn::tanh(head_mlp(tape, params, head, concat)), 0.5, 0.5);
}

/// State value from the task-averaged embedding, 1 x 1.
inline Var critic_value(Tape& tape, const ParameterSet& params, const Var& features) {
  Var pooled = nn::mean_rows(embed(tape, params, features));
  return head_mlp(tape, params, "critic", pooled);
}

struct Trunk {
  Var embedding;
  RoutingOutput routing;
};

inline Trunk forward_trunk(Tape& tape, const ParameterSet& params, const emt::StateFeatures& features) {
  if (features.rows() < 2) throw InvalidInstanceError("policy needs at least 2 tasks");
  if (features.cols() != emt::kFeatureCount) throw DimensionError("policy expects 5 features per task");
  Var e = embed(tape, params, tape.constant(features));
  return {e, tr_forward(tape, params, e)};
}

struct Heads {
  Var concat;
  Var kc_mean;
  Var op_logits;
  Var f_mean;
  Var cr_mean;
};

inline Heads forward_heads(Tape& tape, const ParameterSet& params, const Var& decision,
                           std::span<const std::size_t> source) {
  Heads h;
  h.concat = pair_concat(decision, source);
  h.kc_mean = kc_mean(tape, params, h.concat);
  h.op_logits = op_logits(tape, params, h.concat);
  h.f_mean = unit_mean(tape, params, "f", h.concat);
  h.cr_mean = unit_mean(tape, params, "cr", h.concat);
  return h;
}

/// Sum over rows of log N(value; mean, sd).
inline Var gaussian_log_density(Tape& tape, const Var& mean, std::span<const double> value, double sd) {
  RealMatrix v(static_cast<Eigen::Index>(value.size()), 1);
  for (std::size_t i = 0; i < value.size(); ++i) v(static_cast<Eigen::Index>(i), 0) = value[i];
  Var z = nn::scale(nn::sub(tape.constant(std::move(v)), mean), 1.0 / sd);
  const double norm = -std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  return nn::affine(nn::sum(nn::square(z)), -0.5, norm * static_cast<double>(value.size()));
}

}  // namespace mtorl::policy
