#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nrc {

using complexd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Thrown when a caller breaks an operation's precondition (dimension
// mismatch, invalid parameter value, ...). CLI maps this to exit code 1.
class ContractViolation : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when an input lies outside the mathematical domain of an
// operation (e.g. a traveling wave that does not exist).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Numerical failure during computation (NaN, non-convergence).
// CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Trajectory amplitude overflow; remembers the offending step.
class DivergenceError : public NumericalError {
public:
  DivergenceError(const std::string& msg, std::uint64_t step)
      : NumericalError(msg), step_(step) {}
  std::uint64_t step() const { return step_; }

private:
  std::uint64_t step_;
};

// Checkpoint/file corruption. CLI maps I/O problems to exit code 3.
class IntegrityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Principal branch of an angle, result in (-pi, pi].
inline double principal_angle(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

// Reduce an angle to [0, 2*pi).
inline double reduce_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

} // namespace nrc
