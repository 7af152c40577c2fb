#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mtorl/nn/tape.hpp"

namespace mtorl::nn {

namespace detail {
inline Tape& tape_of(const Var& v) {
  if (v.tape() == nullptr) throw ContractError("operation on an unbound variable");
  return *v.tape();
}
}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_string(a.value()) + " * " + shape_string(b.value()));
  }
  Tape& t = detail::tape_of(a);
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g * tp.value(b).transpose());
    tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  return detail::tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  return detail::tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  return detail::tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b},
                                   [a, b](Tape& tp, const RealMatrix& g) {
                                     tp.accumulate(a, g.cwiseProduct(tp.value(b)));
                                     tp.accumulate(b, g.cwiseProduct(tp.value(a)));
                                   });
}

/// a + row, with `row` (1 x cols) broadcast over every row of `a`.
inline Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: " + shape_string(a.value()) + " + " + shape_string(row.value()));
  }
  RealMatrix out = a.value().rowwise() + row.value().row(0);
  return detail::tape_of(a).record(std::move(out), {a, row}, [a, row](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(row, g.colwise().sum());
  });
}

/// s * a + c
inline Var affine(const Var& a, double s, double c = 0.0) {
  RealMatrix out = (a.value().array() * s + c).matrix();
  return detail::tape_of(a).record(std::move(out), {a}, [a, s](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g * s);
  });
}

inline Var scale(const Var& a, double s) { return affine(a, s, 0.0); }

inline Var tanh(const Var& a) {
  RealMatrix out = a.value().array().tanh().matrix();
  return detail::tape_of(a).record(out, {a}, [a, out](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, (g.array() * (1.0 - out.array().square())).matrix());
  });
}

inline Var relu(const Var& a) {
  RealMatrix out = a.value().cwiseMax(0.0);
  return detail::tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, (tp.value(a).array() > 0.0).select(g.array(), 0.0).matrix());
  });
}

inline Var exp(const Var& a) {
  RealMatrix out = a.value().array().exp().matrix();
  return detail::tape_of(a).record(out, {a}, [a, out](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g.cwiseProduct(out));
  });
}

inline Var square(const Var& a) {
  RealMatrix out = a.value().array().square().matrix();
  return detail::tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, (2.0 * g.array() * tp.value(a).array()).matrix());
  });
}

/// Elementwise clamp to [lo, hi]; the gradient is cut where the clamp is active.
inline Var clamp(const Var& a, double lo, double hi) {
  RealMatrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return detail::tape_of(a).record(std::move(out), {a}, [a, lo, hi](Tape& tp, const RealMatrix& g) {
    const auto& x = tp.value(a).array();
    tp.accumulate(a, ((x >= lo) && (x <= hi)).select(g.array(), 0.0).matrix());
  });
}

/// Elementwise minimum; ties route the gradient to `a`.
inline Var minimum(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "minimum");
  RealMatrix out = a.value().cwiseMin(b.value());
  return detail::tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& tp, const RealMatrix& g) {
    auto take_a = tp.value(a).array() <= tp.value(b).array();
    tp.accumulate(a, take_a.select(g.array(), 0.0).matrix());
    tp.accumulate(b, take_a.select(0.0, g.array()).matrix());
  });
}

inline Var sum(const Var& a) {
  RealMatrix out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, RealMatrix::Constant(tp.value(a).rows(), tp.value(a).cols(), g(0, 0)));
  });
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Column means, 1 x cols.
inline Var mean_rows(const Var& a) {
  const double n = static_cast<double>(a.rows());
  RealMatrix out = a.value().colwise().mean();
  return detail::tape_of(a).record(std::move(out), {a}, [a, n](Tape& tp, const RealMatrix& g) {
    RealMatrix spread = g.replicate(tp.value(a).rows(), 1) / n;
    tp.accumulate(a, spread);
  });
}

inline Var transpose(const Var& a) {
  RealMatrix out = a.value().transpose();
  return detail::tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g.transpose());
  });
}

inline Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
  RealMatrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return detail::tape_of(a).record(std::move(out), {a, b}, [a, b, ca, cb](Tape& tp, const RealMatrix& g) {
    tp.accumulate(a, g.leftCols(ca));
    tp.accumulate(b, g.rightCols(cb));
  });
}

/// Row i of the result is row idx[i] of `a`.
inline Var gather_rows(const Var& a, std::span<const std::size_t> idx) {
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  RealMatrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(a.rows())) throw DimensionError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(static_cast<Eigen::Index>(rows[i]));
  }
  return detail::tape_of(a).record(std::move(out), {a}, [a, rows](Tape& tp, const RealMatrix& g) {
    RealMatrix acc = RealMatrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      acc.row(static_cast<Eigen::Index>(rows[i])) += g.row(static_cast<Eigen::Index>(i));
    }
    tp.accumulate(a, acc);
  });
}

/// Column vector with entry i = a(i, cols[i]).
inline Var pick(const Var& a, std::span<const std::size_t> cols) {
  if (cols.size() != static_cast<std::size_t>(a.rows())) throw DimensionError("pick: one column per row required");
  std::vector<std::size_t> c(cols.begin(), cols.end());
  RealMatrix out(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (c[static_cast<std::size_t>(i)] >= static_cast<std::size_t>(a.cols())) throw DimensionError("pick: column out of range");
    out(i, 0) = a.value()(i, static_cast<Eigen::Index>(c[static_cast<std::size_t>(i)]));
  }
  return detail::tape_of(a).record(std::move(out), {a}, [a, c](Tape& tp, const RealMatrix& g) {
    RealMatrix acc = RealMatrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    for (std::size_t i = 0; i < c.size(); ++i) {
      acc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c[i])) = g(static_cast<Eigen::Index>(i), 0);
    }
    tp.accumulate(a, acc);
  });
}

namespace detail {
inline bool excluded(bool exclude_diagonal, Eigen::Index r, Eigen::Index c) { return exclude_diagonal && r == c; }

/// Row-wise softmax; with `exclude_diagonal` the (i,i) entries get probability 0.
inline RealMatrix softmax_values(const RealMatrix& x, bool exclude_diagonal) {
  RealMatrix p = RealMatrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!excluded(exclude_diagonal, r, c)) m = std::max(m, x(r, c));
    }
    double z = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (excluded(exclude_diagonal, r, c)) continue;
      p(r, c) = std::exp(x(r, c) - m);
      z += p(r, c);
    }
    p.row(r) /= z;
  }
  return p;
}
}  // namespace detail

inline Var softmax_rows(const Var& a) {
  RealMatrix p = detail::softmax_values(a.value(), false);
  return detail::tape_of(a).record(p, {a}, [a, p](Tape& tp, const RealMatrix& g) {
    RealMatrix dot = g.cwiseProduct(p).rowwise().sum();
    tp.accumulate(a, p.cwiseProduct(g - dot.replicate(1, p.cols())));
  });
}

/// Row-wise log-softmax. With `exclude_diagonal` the diagonal is masked to -inf
/// and receives no gradient.
inline Var log_softmax_rows(const Var& a, bool exclude_diagonal = false) {
  if (exclude_diagonal && a.rows() != a.cols()) throw DimensionError("masked log_softmax needs a square matrix");
  RealMatrix p = detail::softmax_values(a.value(), exclude_diagonal);
  RealMatrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      out(r, c) = detail::excluded(exclude_diagonal, r, c) ? -std::numeric_limits<double>::infinity()
                                                           : std::log(p(r, c));
    }
  }
  return detail::tape_of(a).record(std::move(out), {a}, [a, p, exclude_diagonal](Tape& tp, const RealMatrix& g) {
    RealMatrix gm = g;
    if (exclude_diagonal) gm.diagonal().setZero();
    RealMatrix total = gm.rowwise().sum();
    RealMatrix dx = gm - p.cwiseProduct(total.replicate(1, p.cols()));
    if (exclude_diagonal) dx.diagonal().setZero();
    tp.accumulate(a, dx);
  });
}

/// Per-row entropy of softmax(a), rows x 1.
inline Var row_entropy(const Var& a, bool exclude_diagonal = false) {
  RealMatrix p = detail::softmax_values(a.value(), exclude_diagonal);
  RealMatrix h = RealMatrix::Zero(a.rows(), 1);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      if (p(r, c) > 0.0) h(r, 0) -= p(r, c) * std::log(p(r, c));
    }
  }
  return detail::tape_of(a).record(h, {a}, [a, p, h](Tape& tp, const RealMatrix& g) {
    RealMatrix dx = RealMatrix::Zero(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        if (p(r, c) > 0.0) dx(r, c) = -g(r, 0) * p(r, c) * (std::log(p(r, c)) + h(r, 0));
      }
    }
    tp.accumulate(a, dx);
  });
}

/// y = x W + b using parameters `<layer>.weight` and `<layer>.bias`.
inline Var dense(Tape& tape, const ParameterSet& params, const std::string& layer, const Var& x) {
  Var w = tape.parameter(params, layer + ".weight");
  Var b = tape.parameter(params, layer + ".bias");
  if (x.cols() != w.rows() || b.cols() != w.cols()) {
    throw DimensionError("dense '" + layer + "': input " + shape_string(x.value()) + ", weight " +
                         shape_string(w.value()));
  }
  return add_row(matmul(x, w), b);
}

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Normalizes every column over the rows (the task axis), then applies the
/// learnable `<name>.scale` / `<name>.shift` rows. Uses the statistics of the
/// batch it is given; there are no running averages.
inline Var batch_norm(Tape& tape, const ParameterSet& params, const std::string& name, const Var& x) {
  const Eigen::Index k = x.rows();
  if (k < 2) throw InvalidInstanceError("batch_norm needs at least 2 rows, got " + std::to_string(k));
  Var gamma = tape.parameter(params, name + ".scale");
  Var beta = tape.parameter(params, name + ".shift");
  if (gamma.cols() != x.cols() || beta.cols() != x.cols()) throw DimensionError("batch_norm: width mismatch");

  const RealMatrix& xv = x.value();
  RealMatrix mu = xv.colwise().mean();
  RealMatrix centered = xv - mu.replicate(k, 1);
  RealMatrix var = centered.array().square().colwise().sum() / static_cast<double>(k);
  RealMatrix inv_std = (var.array() + kBatchNormEpsilon).rsqrt().matrix();
  RealMatrix xhat = centered.cwiseProduct(inv_std.replicate(k, 1));
  RealMatrix out = xhat.cwiseProduct(gamma.value().replicate(k, 1)) + beta.value().replicate(k, 1);

  return tape.record(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, k](Tape& tp, const RealMatrix& g) {
    const double n = static_cast<double>(k);
    tp.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
    tp.accumulate(beta, g.colwise().sum());
    RealMatrix dxhat = g.cwiseProduct(tp.value(gamma).replicate(k, 1));
    RealMatrix sum_d = dxhat.colwise().sum();
    RealMatrix sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
    RealMatrix dx = (n * dxhat - sum_d.replicate(k, 1) - xhat.cwiseProduct(sum_dx.replicate(k, 1)));
    dx = dx.cwiseProduct(inv_std.replicate(k, 1)) / n;
    tp.accumulate(x, dx);
  });
}

struct AttentionOutput {
  Var scores;  ///< pre-softmax (Q K^T) / sqrt(width), K x K
  Var output;  ///< softmax(scores) V, K x width
};

/// Single-head scaled dot-product self-attention over the rows of `e`, with
/// bias-free projections `<name>.query`, `<name>.key`, `<name>.value`.
inline AttentionOutput single_head_attention(Tape& tape, const ParameterSet& params, const std::string& name,
                                             const Var& e) {
  if (e.rows() < 2) throw InvalidInstanceError("attention needs at least 2 tasks, got " + std::to_string(e.rows()));
  Var wq = tape.parameter(params, name + ".query");
  Var wk = tape.parameter(params, name + ".key");
  Var wv = tape.parameter(params, name + ".value");
  Var q = matmul(e, wq);
  Var k = matmul(e, wk);
  Var v = matmul(e, wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(wk.cols()));
  Var scores = scale(matmul(q, transpose(k)), inv_sqrt);
  Var output = matmul(softmax_rows(scores), v);
  return {scores, output};
}

}  // namespace mtorl::nn

namespace mtorl::nn {

enum class Activation { tanh, relu, softmax_rows };

inline Var activate(Activation kind, const Var& x) {
  switch (kind) {
    case Activation::tanh: return tanh(x);
    case Activation::relu: return relu(x);
    case Activation::softmax_rows: return softmax_rows(x);
  }
  throw ContractError("unknown activation");
}

}  // namespace mtorl::nn
