#pragma once

#include <stdexcept>
#include <string>

namespace fomads {

// Precondition violations (bad orders, bad indices, empty inputs) throw
// std::domain_error. The three types below map onto CLI exit codes.

/// Malformed or inconsistent configuration. Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data (non-finite samples, malformed files). Exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training. Exit code 4.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fomads
