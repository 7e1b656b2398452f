#pragma once

#include <stdexcept>
#include <string>

namespace partstack {

// Exit codes used by the CLI; library code throws, the CLI maps to codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitIo = 3,
  kExitContract = 4,
  kExitNumeric = 5,
};

// File or parse failure (malformed dataset, truncated file, ...).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violation of a cross-stage contract (missing localization checkpoint,
// checkpoint format version mismatch, config-hash mismatch, ...).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (NaN loss during training, non-finite report values).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace partstack
