#pragma once

#include <stdexcept>
#include <string>

namespace soar {

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Rejection sampling ran out of attempts before drawing an accepted outcome.
class ResampleBudgetError : public std::runtime_error {
 public:
  ResampleBudgetError(const std::string& what, int tries_used)
      : std::runtime_error(what), tries_used_(tries_used) {}

  int tries_used() const noexcept { return tries_used_; }

 private:
  int tries_used_;
};

/// Bad or inconsistent run configuration, missing artifacts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void expects(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

inline void expects(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace soar
