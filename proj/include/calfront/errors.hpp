#pragma once

#include <stdexcept>
#include <string>

namespace calfront {

/// Input violates a documented precondition (bad config, bad arguments).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data on disk or in memory is inconsistent (missing files, bad labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training or inference produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace calfront
