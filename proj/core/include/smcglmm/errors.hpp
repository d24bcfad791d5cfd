#pragma once

#include <stdexcept>
#include <string>

namespace smcglmm {

// Error categories map one-to-one onto CLI exit codes:
// ValidationError -> 2, NumericError -> 3, IoError -> 4.

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace smcglmm
