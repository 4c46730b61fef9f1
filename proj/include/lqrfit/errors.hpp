#pragma once

#include <stdexcept>
#include <string>

namespace lqrfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented invariant (symmetry, definiteness, range).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A linear system that must be solved is singular.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what + " (residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// A multi-run solver produced no usable result.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace lqrfit
