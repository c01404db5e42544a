#pragma once

#include <stdexcept>
#include <string>

namespace supkde {

/// Base class for all library errors. `exit_code` drives the CLI's
/// machine-readable error reporting; each failure class gets its own code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ~Error() = default;
  virtual int exit_code() const noexcept { return 1; }
  virtual const char* kind() const noexcept { return "error"; }
};

/// File cannot be opened / read / written.
class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
  const char* kind() const noexcept override { return "io"; }
};

/// File exists but its content does not parse (CSV, JSON, binary layout).
class FormatError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
  const char* kind() const noexcept override { return "format"; }
};

/// The bandwidth grid H_n came out empty for the requested n and a*.
class EmptyCandidateError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
  const char* kind() const noexcept override { return "empty_candidates"; }
};

/// Adaptive quadrature failed to reach the requested tolerance.
class QuadratureError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
  const char* kind() const noexcept override { return "quadrature"; }
};

/// Precondition violation on an operation argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 6; }
  const char* kind() const noexcept override { return "argument"; }
};

}  // namespace supkde
