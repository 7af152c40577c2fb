#pragma once

#include <Eigen/Core>

#include <string>

#include "mtorl/errors.hpp"

namespace mtorl {

/// Dense row-major matrix of 64-bit reals; every intermediate activation lives in one.
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;

inline std::string shape_string(const RealMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const RealMatrix& a, const RealMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace mtorl
