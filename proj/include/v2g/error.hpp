#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace v2g {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or vector shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced inside a forward/backward pass or an update.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range input data (CSV rows, records).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The charging problem admits no feasible schedule.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Training loss became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Iterative method did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace v2g
