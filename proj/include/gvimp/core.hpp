#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gvimp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector2 = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;

using Index = Eigen::Index;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (t < s, p out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between a vector/matrix and what the model expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be positive definite is not, or a pivot block is singular.
/// `index()` carries the offending block / interval index when one applies.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, Index index = -1)
      : Error(what), index_(index) {}
  Index index() const noexcept { return index_; }

 private:
  Index index_;
};

/// A signed-distance query outside the grid's bounding box.
class OutOfBoundsError : public Error {
 public:
  OutOfBoundsError(const std::string& what, Vector2 point)
      : Error(what), point_(point) {}
  const Vector2& point() const noexcept { return point_; }

 private:
  Vector2 point_;
};

/// A computation would exceed its work budget (quadrature grid too large).
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A factor does not fit the block-tridiagonal structure.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number (0 when unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// File could not be opened / written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gvimp
