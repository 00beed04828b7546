#pragma once

#include <stdexcept>
#include <string>

namespace fedcpu {

/// Invalid configuration or inconsistent shapes.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A local update with zero spread cannot be normalized.
class DegenerateUpdateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure inside one simulated round; the round index is kept for reporting.
class RoundError : public std::runtime_error {
 public:
  RoundError(int round, const std::string& what)
      : std::runtime_error("round " + std::to_string(round) + ": " + what),
        round_(round) {}

  int round() const noexcept { return round_; }

 private:
  int round_;
};

}  // namespace fedcpu
