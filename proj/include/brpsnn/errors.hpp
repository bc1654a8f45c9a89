#pragma once

#include <stdexcept>
#include <string>

namespace brpsnn {

// Caller broke an API precondition (bad dimensions, invalid parameter range).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed run configuration (unknown key, unparsable topology, bad value).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset file is missing, truncated, or violates its format.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file is missing, corrupt, or inconsistent with the network.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value reached a numeric kernel.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace brpsnn
