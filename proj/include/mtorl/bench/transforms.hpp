#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mtorl/nn/matrix.hpp"
#include "mtorl/rng.hpp"

namespace mtorl::bench {

/// Random orthogonal D x D matrix: the product of D Householder reflections
/// I - 2 v v^T, each built from an independent Gaussian direction.
inline RealMatrix make_rotation(std::size_t dim, Rng& rng) {
  if (dim == 0) throw ContractError("make_rotation: dimension must be >= 1");
  const auto d = static_cast<Eigen::Index>(dim);
  RealMatrix w = RealMatrix::Identity(d, d);
  RealVector v(d);
  for (std::size_t k = 0; k < dim; ++k) {
    double norm = 0.0;
    while (norm < 1e-12) {
      for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal(0.0, 1.0);
      norm = v.norm();
    }
    v /= norm;
    // W <- W (I - 2 v v^T)
    RealVector wv = w * v;
    w.noalias() -= 2.0 * wv * v.transpose();
  }
  return w;
}

/// Optimum displacement, each component level * (lb + U[0,1] * (ub - lb)).
inline RealVector make_shift(double level, double lb, double ub, std::size_t dim, Rng& rng) {
  if (!(lb < ub)) throw ContractError("make_shift: lower bound must be below upper bound");
  RealVector s(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = level * (lb + rng.uniform() * (ub - lb));
  return s;
}

/// Unified [0,1]^D coordinates to the box [lb, ub]^D. Components outside
/// [0,1] are clamped first.
inline RealVector decode(std::span<const double> unified, double lb, double ub) {
  RealVector x(static_cast<Eigen::Index>(unified.size()));
  for (std::size_t i = 0; i < unified.size(); ++i) {
    x(static_cast<Eigen::Index>(i)) = lb + std::clamp(unified[i], 0.0, 1.0) * (ub - lb);
  }
  return x;
}

inline RealVector encode(std::span<const double> x, double lb, double ub) {
  RealVector u(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) u(static_cast<Eigen::Index>(i)) = (x[i] - lb) / (ub - lb);
  return u;
}

inline double orthogonality_error(const RealMatrix& w) {
  return (w.transpose() * w - RealMatrix::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff();
}

}  // namespace mtorl::bench
