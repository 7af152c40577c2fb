#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "mtorl/nn/matrix.hpp"
#include "mtorl/rng.hpp"

namespace mtorl::nn {

struct Parameter {
  RealMatrix value;
  RealMatrix grad;
  RealMatrix moment1;
  RealMatrix moment2;

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
};

/// Named trainable arrays plus the adaptive-moment state that goes with them.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (entries_.count(name) != 0) throw ContractError("duplicate parameter name: " + name);
    Parameter p;
    p.value = RealMatrix::Zero(rows, cols);
    p.grad = RealMatrix::Zero(rows, cols);
    p.moment1 = RealMatrix::Zero(rows, cols);
    p.moment2 = RealMatrix::Zero(rows, cols);
    return entries_.emplace(name, std::move(p)).first->second;
  }

  /// Dense layer `name.weight` (in x out) and `name.bias` (1 x out), uniform in
  /// +-1/sqrt(in).
  void add_dense(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto* p : {&add(name + ".weight", in, out), &add(name + ".bias", 1, out)}) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = rng.uniform(-bound, bound);
    }
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Parameter& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DimensionError("unknown parameter: " + name);
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DimensionError("unknown parameter: " + name);
    return it->second;
  }

  void zero_grad() {
    for (auto& [_, p] : entries_) p.grad.setZero();
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t n) { step_count_ = n; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Parameter> entries_;
  std::uint64_t step_count_ = 0;
};

}  // namespace mtorl::nn
