#pragma once

#include <stdexcept>
#include <string>

namespace bridge {

// Argument outside the domain where a formula is defined (t outside [0, T],
// zero variance in a KL denominator, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Evaluation requested at a time where the bridge drift or score is singular
// (t = T for the h-transform and the PF-ODE, c_t = 0 for the score).
class SingularTimeError : public DomainError {
 public:
  SingularTimeError(const std::string& what, double t) : DomainError(what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

// Invalid user configuration: bad grid sizes, unknown keys, malformed files.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A sampler produced a NaN or Inf state.
class NonFiniteStateError : public std::runtime_error {
 public:
  NonFiniteStateError(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

// Iterative numerical routine failed to converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bridge
