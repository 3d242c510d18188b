#pragma once

#include <stdexcept>
#include <string>

namespace emocause {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (bad hyperparameter, unknown mode, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Lookup of a key that is not present (e.g. knowledge cache miss).
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Misuse of the autodiff graph (double backward, non-scalar loss).
class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace emocause
