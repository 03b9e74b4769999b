#pragma once

#include <stdexcept>
#include <string>

namespace estcomm {

/// Caller supplied something outside an operation's preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Enumeration or dense-algebra size limit exceeded.
class CapExceeded : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The truncated SVD could not meet the entrywise error the SVD protocol needs.
class ApproximationError : public std::runtime_error {
 public:
  ApproximationError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

}  // namespace estcomm
