#pragma once

#include <stdexcept>
#include <string>

namespace nsmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation time or point outside the data a field was built from.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise malformed sample data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on a domain that does not support it
/// (e.g. Leray projection in whole-space mode).
class UnsupportedDomainError : public Error {
 public:
  using Error::Error;
};

/// Operation that has no meaning in the current mode (e.g. the
/// Bismut-Elworthy-Li weight with zero noise).
class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

/// Periodic Poisson problem with a source of nonzero mean.
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

/// Stored data (e.g. Brownian increments) required but absent.
class MissingDataError : public Error {
 public:
  using Error::Error;
};

/// Too many flow paths left the whole-space bounding ball.
class FlowEscapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The inner u/p coupling of a Picard step failed to contract.
class InnerDivergenceError : public Error {
 public:
  InnerDivergenceError(const std::string& what, int iterations, double last_residual)
      : Error(what), iterations_(iterations), last_residual_(last_residual) {}

  int iterations() const noexcept { return iterations_; }
  double last_residual() const noexcept { return last_residual_; }

 private:
  int iterations_;
  double last_residual_;
};

}  // namespace nsmc
