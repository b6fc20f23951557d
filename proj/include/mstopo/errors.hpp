#pragma once

#include <stdexcept>
#include <string>

namespace mstopo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or shape mismatch at an API boundary.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Finite-element failure: singular system, non-convergent solve.
class FeError : public Error {
 public:
  using Error::Error;
};

/// Configuration parse or validation failure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File I/O failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mstopo
