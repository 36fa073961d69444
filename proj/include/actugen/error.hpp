#pragma once

#include <stdexcept>
#include <string>

namespace actugen {

// Malformed input data: unreadable CSV, schema violations, invalid cells.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or operation arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a model fit (rank deficiency, empty training set).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace actugen
