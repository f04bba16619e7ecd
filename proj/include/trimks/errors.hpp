#ifndef TRIMKS_ERRORS_HPP_
#define TRIMKS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace trimks {

/// Thrown when an input violates a documented precondition
/// (bad dimensions, non-finite data, out-of-range parameters).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a computation produces a non-finite intermediate
/// (diverging training loss, overflowing forward pass).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace trimks

#endif  // TRIMKS_ERRORS_HPP_
