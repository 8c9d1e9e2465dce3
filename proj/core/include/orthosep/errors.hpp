#pragma once

#include <stdexcept>
#include <string>

namespace orthosep {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system and format failures (CLI exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerical contract violations: non-finite data, degenerate inputs,
/// failed self-checks (CLI exit code 1).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace orthosep
