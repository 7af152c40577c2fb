#pragma once

#include <stdexcept>
#include <string>

namespace mtorl {

/// Operand shapes do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// The multitask instance cannot be processed (e.g. fewer than two tasks).
struct InvalidInstanceError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Bad user-facing configuration (population too small, unknown variant...).
struct ConfigurationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Checkpoint or dataset file could not be read back.
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Statistical test has too few usable samples.
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mtorl
