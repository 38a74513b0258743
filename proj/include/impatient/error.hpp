#pragma once

#include <stdexcept>
#include <string>

namespace impatient {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a forward or backward pass.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied parameters (configs, schemes, policies).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a stateful object, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace impatient
