#pragma once

#include <stdexcept>
#include <string>

namespace gmnmt {

// Shape disagreement between operands.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (dataset lines, graphs, masks).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameter or flag combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. replaying a consumed tape or an index out of range.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A tensor became non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gmnmt
