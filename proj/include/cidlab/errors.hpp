#pragma once

#include <stdexcept>
#include <string>

namespace cidlab {

// Bad or inconsistent input data (missing files, malformed rows, duplicate
// keys, coverage gaps). CLI maps this to exit code 1.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid run configuration (schema violations, out-of-range settings).
// CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerically unusable regression input (rank deficiency, too few rows).
class SingularityError : public DataError {
 public:
  explicit SingularityError(const std::string& msg) : DataError(msg) {}
};

}  // namespace cidlab
