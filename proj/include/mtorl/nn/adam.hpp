#pragma once

#include <cmath>

#include "mtorl/nn/parameters.hpp"

namespace mtorl::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment update, then zeroes the gradients.
/// Entries whose gradient is identically zero are left untouched (values and
/// moments), so a zero-gradient step is the identity.
inline void adam_step(ParameterSet& params, double learning_rate, const AdamOptions& opt = {}) {
  const std::uint64_t t = params.step_count() + 1;
  params.set_step_count(t);
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (auto& [_, p] : params) {
    if (p.grad.isZero(0.0)) continue;
    p.moment1 = opt.beta1 * p.moment1 + (1.0 - opt.beta1) * p.grad;
    p.moment2 = opt.beta2 * p.moment2 + (1.0 - opt.beta2) * p.grad.cwiseProduct(p.grad);
    auto m_hat = p.moment1.array() / c1;
    auto v_hat = p.moment2.array() / c2;
    p.value.array() -= learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
    p.grad.setZero();
  }
}

}  // namespace mtorl::nn
