#pragma once

#include <stdexcept>
#include <string>

namespace catpose {

/// Base class for every error raised by the library. `exit_code()` is the
/// process status the command-line tool reports for this error family.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

/// Bad configuration or malformed input data.
class ValidationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Numerical failures: degenerate geometry, no RANSAC consensus, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConsensusError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace catpose
