#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace imech {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax, binding or evaluation failure of an expression. Offsets are byte
/// positions into the expression source, end exclusive.
class ExpressionError : public Error {
 public:
  ExpressionError(const std::string& message, std::size_t begin, std::size_t end);

  std::size_t begin() const { return begin_; }
  std::size_t end() const { return end_; }

 private:
  std::size_t begin_;
  std::size_t end_;
};

/// Mismatched base points, non-finite values, singular or indefinite matrices.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Constraint gradients (or velocity rows) are not linearly independent.
class RegularityError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// A constitutive law was called outside its admissible domain.
class LawError : public Error {
 public:
  using Error::Error;
};

/// A law produced a right velocity that violates the constraints it claims
/// to respect.
class LawContractError : public LawError {
 public:
  using LawError::LawError;
};

/// Scenario schema or consistency failure.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure during a simulation run.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace imech
