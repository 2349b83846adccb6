#pragma once

#include <stdexcept>
#include <string>

namespace purcell {

/// Invalid arguments or configuration (bad units, empty inputs, schema errors).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A formula evaluated outside its domain (zero detuning, negative radicand...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical failure: non-convergence, step-size underflow, network pole.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PoleError : public NumericError {
 public:
  using NumericError::NumericError;
};

class FitError : public NumericError {
 public:
  FitError(const std::string& what, double last_residual)
      : NumericError(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

class IntegrationError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Measured data that cannot come from the assumed error model.
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public InconsistencyError {
 public:
  using InconsistencyError::InconsistencyError;
};

}  // namespace purcell
