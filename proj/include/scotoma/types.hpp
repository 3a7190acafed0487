#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace scotoma {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error categories map onto the CLI's stable exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration or hyperparameters (exit 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent input data (exit 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: singular scatter, degenerate objective (exit 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace scotoma
