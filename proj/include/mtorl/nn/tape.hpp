#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "mtorl/nn/matrix.hpp"
#include "mtorl/nn/parameters.hpp"

namespace mtorl::nn {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const RealMatrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Dynamic reverse-accumulation tape. A fresh tape is built for each forward
/// pass; nodes are stored in a deque so references to values stay valid.
class Tape {
 public:
  /// Receives the gradient flowing into a node and pushes it to the parents.
  using Backprop = std::function<void(Tape&, const RealMatrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(RealMatrix value) {
    nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
    return Var(this, nodes_.size() - 1);
  }

  /// Leaf bound to a named parameter. Repeated requests share one leaf.
  Var parameter(const ParameterSet& params, const std::string& name) {
    if (bound_ == nullptr) bound_ = &params;
    if (bound_ != &params) throw ContractError("tape already bound to a different parameter set");
    if (auto it = leaves_.find(name); it != leaves_.end()) return Var(this, it->second);
    nodes_.push_back(Node{params.at(name).value, {}, {}, name, true});
    leaves_.emplace(name, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
  }

  /// Records an operation result. `requires_grad` is inherited from the parents.
  Var record(RealMatrix value, std::initializer_list<Var> parents, Backprop backprop) {
    bool needs = false;
    for (const Var& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id_].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backprop) : Backprop{}, {}, needs});
    return Var(this, nodes_.size() - 1);
  }

  const RealMatrix& value(const Var& v) const { return nodes_[v.id_].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }

  /// Adds `g` into the gradient slot of `v` (only meaningful during backward).
  void accumulate(const Var& v, const RealMatrix& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    require_same_shape(n.grad, g, "gradient accumulation");
    n.grad += g;
  }

  /// Reverse sweep from a scalar node. Afterwards grad(v) holds d loss / d v.
  void backward(const Var& loss) {
    check_owner(loss);
    const RealMatrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward needs a 1x1 loss, got " + shape_string(lv));
    }
    for (Node& n : nodes_) {
      if (n.requires_grad) n.grad = RealMatrix::Zero(n.value.rows(), n.value.cols());
    }
    if (!nodes_[loss.id_].requires_grad) return;
    nodes_[loss.id_].grad(0, 0) = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backprop) continue;
      n.backprop(*this, n.grad);
    }
    swept_ = true;
  }

  /// Reverse sweep, then adds every parameter-leaf gradient into `params`.
  void backward(const Var& loss, ParameterSet& params) {
    if (bound_ != nullptr && bound_ != &params) {
      throw ContractError("gradients must go to the parameter set used in the forward pass");
    }
    backward(loss);
    for (const auto& [name, id] : leaves_) {
      const Node& n = nodes_[id];
      if (n.grad.size() != 0) params.at(name).grad += n.grad;
    }
  }

  const RealMatrix& grad(const Var& v) const {
    if (!swept_) throw ContractError("grad() called before backward()");
    return nodes_[v.id_].grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    RealMatrix value;
    RealMatrix grad;
    Backprop backprop;
    std::string param_name;
    bool requires_grad = false;
  };

  void check_owner(const Var& v) const {
    if (v.tape_ != this) throw ContractError("variable belongs to a different tape");
  }

  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> leaves_;
  const ParameterSet* bound_ = nullptr;
  bool swept_ = false;
};

inline const RealMatrix& Var::value() const { return tape_->value(*this); }

}  // namespace mtorl::nn
