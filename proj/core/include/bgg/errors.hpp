#pragma once

#include <stdexcept>
#include <string>

namespace bgg {

/// Inconsistent tensor extents (mismatched inner dims, non-integral conv output, ...).
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN or infinity surfaced in a loss, gradient or parameter.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, or a configuration that does not match stored data.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stored data (checkpoint, corpus) disagrees with the requested setup.
class MismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace bgg
