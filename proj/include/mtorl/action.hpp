#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mtorl/errors.hpp"

namespace mtorl {

/// One generation's joint decision for all K target tasks. Task indices are
/// 0-based; operator ids follow the pool numbering 1..4.
struct ActionBundle {
  std::vector<std::size_t> source;     ///< source task routed to each target
  std::vector<double> transfer_ratio;  ///< elite proportion to transfer
  std::vector<int> op;                 ///< mutation operator id
  std::vector<double> mutation;        ///< F
  std::vector<double> crossover;       ///< Cr
  double log_prob = 0.0;

  // Head means, kept for diagnostics.
  std::vector<double> mu_kc;
  std::vector<double> mu_f;
  std::vector<double> mu_cr;

  std::size_t size() const { return source.size(); }
};

inline constexpr int kOperatorCount = 4;

/// Throws ContractError unless every field is sized K and within range.
/// `max_ratio` is 0.5 for the standard action space.
inline void validate_action(const ActionBundle& a, std::size_t tasks, double max_ratio = 0.5) {
  auto sized = [&](std::size_t n, const char* what) {
    if (n != tasks) throw ContractError(std::string("action field '") + what + "' has wrong length");
  };
  sized(a.source.size(), "source");
  sized(a.transfer_ratio.size(), "transfer_ratio");
  sized(a.op.size(), "op");
  sized(a.mutation.size(), "mutation");
  sized(a.crossover.size(), "crossover");
  for (std::size_t j = 0; j < tasks; ++j) {
    if (a.source[j] >= tasks) throw ContractError("source task index out of range");
    if (a.source[j] == j) throw ContractError("task " + std::to_string(j) + " routed to itself");
    if (!(a.transfer_ratio[j] >= 0.0 && a.transfer_ratio[j] <= max_ratio)) {
      throw ContractError("transfer ratio out of range: " + std::to_string(a.transfer_ratio[j]));
    }
    if (a.op[j] < 1 || a.op[j] > kOperatorCount) throw ContractError("operator id out of range");
    if (!(a.mutation[j] >= 0.0 && a.mutation[j] <= 1.0)) throw ContractError("F out of [0,1]");
    if (!(a.crossover[j] >= 0.0 && a.crossover[j] <= 1.0)) throw ContractError("Cr out of [0,1]");
  }
}

}  // namespace mtorl
