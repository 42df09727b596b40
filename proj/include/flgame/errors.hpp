#pragma once

#include <stdexcept>
#include <string>

namespace flgame {

// Recoverable precondition violation on a formula input. Never silently
// clamped: callers (budget search, outer iteration) need to detect
// infeasible regimes.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// The closed forms require at least two competing LMOs.
struct MechanismUndefinedError : std::runtime_error {
  explicit MechanismUndefinedError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: wrong action vector length, stepping a finished episode, ...
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite returns or losses during policy training.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flgame
