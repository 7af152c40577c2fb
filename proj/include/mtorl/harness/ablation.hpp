#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtorl/emt/state.hpp"
#include "mtorl/policy/policy.hpp"

namespace mtorl::harness {

enum class AblationVariant { full, no_tr, no_kc, no_op, no_f, no_cr, random_all, no_transfer };

inline constexpr std::array<AblationVariant, 8> kAllVariants = {
    AblationVariant::full, AblationVariant::no_tr, AblationVariant::no_kc,      AblationVariant::no_op,
    AblationVariant::no_f, AblationVariant::no_cr, AblationVariant::random_all, AblationVariant::no_transfer};

inline std::string_view variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_tr: return "no_tr";
    case AblationVariant::no_kc: return "no_kc";
    case AblationVariant::no_op: return "no_op";
    case AblationVariant::no_f: return "no_f";
    case AblationVariant::no_cr: return "no_cr";
    case AblationVariant::random_all: return "random_all";
    case AblationVariant::no_transfer: return "no_transfer";
  }
  return "?";
}

inline AblationVariant parse_variant(std::string_view name) {
  for (auto v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigurationError("unknown ablation variant: " + std::string(name));
}

/// Uniform task index in [0, K) other than `self`.
inline std::size_t uniform_other_task(std::size_t self, std::size_t k, Rng& rng) {
  std::size_t r = rng.index(k - 1);
  return r >= self ? r + 1 : r;
}

/// A policy with at most one head replaced, or one of the two policy-free
/// controls (random_all, no_transfer).
class Controller {
 public:
  Controller(const nn::ParameterSet* params, AblationVariant variant) : params_(params), variant_(variant) {
    if (needs_policy() && params_ == nullptr) {
      throw ConfigurationError("variant '" + std::string(variant_name(variant)) + "' needs policy parameters");
    }
  }

  AblationVariant variant() const { return variant_; }

  bool needs_policy() const {
    return variant_ != AblationVariant::random_all && variant_ != AblationVariant::no_transfer;
  }

  /// no_kc draws ratios from U[0,1], beyond the usual 0.5 cap.
  emt::EngineConfig adjust(emt::EngineConfig config) const {
    if (variant_ == AblationVariant::no_kc) config.max_transfer_ratio = 1.0;
    return config;
  }

  /// `ablation_streams` feed the substituted component only, so the policy's
  /// own draws are identical to the full variant's.
  ActionBundle decide(const emt::StateFeatures& features, policy::ActMode mode, std::span<Rng> policy_streams,
                      std::span<Rng> ablation_streams, policy::DecisionContext* context = nullptr) const {
    const auto k = static_cast<std::size_t>(features.rows());
    if (variant_ != AblationVariant::full && ablation_streams.size() != k) {
      throw ContractError("ablation needs one random stream per task");
    }
    if (variant_ == AblationVariant::random_all) return random_action(k, ablation_streams);
    if (variant_ == AblationVariant::no_transfer) return idle_action(k);

    policy::ActionOverrides o;
    switch (variant_) {
      case AblationVariant::no_tr: {
        std::vector<std::size_t> s(k);
        for (std::size_t j = 0; j < k; ++j) s[j] = uniform_other_task(j, k, ablation_streams[j]);
        o.source = std::move(s);
        break;
      }
      case AblationVariant::no_kc: {
        std::vector<double> r(k);
        for (std::size_t j = 0; j < k; ++j) r[j] = ablation_streams[j].uniform();
        o.transfer_ratio = std::move(r);
        break;
      }
      case AblationVariant::no_op: {
        std::vector<int> op(k);
        for (std::size_t j = 0; j < k; ++j) op[j] = static_cast<int>(ablation_streams[j].index(kOperatorCount)) + 1;
        o.op = std::move(op);
        break;
      }
      case AblationVariant::no_f: o.mutation = std::vector<double>(k, 0.5); break;
      case AblationVariant::no_cr: o.crossover = std::vector<double>(k, 0.5); break;
      default: break;
    }
    return policy::act(features, *params_, mode, policy_streams, o, context);
  }

 private:
  static ActionBundle random_action(std::size_t k, std::span<Rng> streams) {
    ActionBundle a;
    for (std::size_t j = 0; j < k; ++j) {
      Rng& rng = streams[j];
      a.source.push_back(uniform_other_task(j, k, rng));
      a.transfer_ratio.push_back(rng.uniform(0.0, 0.5));
      a.op.push_back(static_cast<int>(rng.index(kOperatorCount)) + 1);
      a.mutation.push_back(rng.uniform());
      a.crossover.push_back(rng.uniform());
    }
    return a;
  }

  static ActionBundle idle_action(std::size_t k) {
    ActionBundle a;
    for (std::size_t j = 0; j < k; ++j) {
      a.source.push_back((j + 1) % k);
      a.transfer_ratio.push_back(0.0);
      a.op.push_back(1);
      a.mutation.push_back(0.5);
      a.crossover.push_back(0.5);
    }
    return a;
  }

  const nn::ParameterSet* params_;
  AblationVariant variant_;
};

inline Controller apply_ablation(AblationVariant variant, const nn::ParameterSet* params) {
  return Controller(params, variant);
}

}  // namespace mtorl::harness
