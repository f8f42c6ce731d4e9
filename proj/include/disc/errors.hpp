#pragma once

#include <stdexcept>
#include <string>

namespace disc {

// Malformed or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, corrupt, or inconsistent data files (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerically degenerate input, e.g. a zero-norm vector or zero-variance condition.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A broken internal invariant (CLI exit code 4).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace disc
