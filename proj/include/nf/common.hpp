#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace nf {

using Index = Eigen::Index;

/// Shape disagreement between operands (wrong rank, mismatched extents).
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Input outside the mathematical domain of an operation or map
/// (log of a non-positive value, singular matrix, bijector domain).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation produced a non-finite value (overflow, inf, nan).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or unreadable input data (files, formats).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A data point fell outside the model's support. Carries the row index.
class OutOfSupportError : public DomainError {
 public:
  OutOfSupportError(Index row, const std::string& what)
      : DomainError(what), row_(row) {}
  Index row() const { return row_; }

 private:
  Index row_;
};

}  // namespace nf
