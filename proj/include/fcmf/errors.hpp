#pragma once

#include <stdexcept>
#include <string>

namespace fcmf {

// Shape or rank disagreement between kernel operands.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters or model configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or contract-violating input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or unreadable files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced during forward or training.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fcmf
