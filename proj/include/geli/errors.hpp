#pragma once

#include <stdexcept>
#include <string>

namespace geli {

/// Invalid configuration: bad key, out-of-range value, malformed config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (schema violations, bad labels, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required pipeline artifact is missing, truncated or stale.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or numerically impossible requests at runtime.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace geli
