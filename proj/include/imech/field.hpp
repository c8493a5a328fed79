#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "imech/expression.hpp"
#include "imech/types.hpp"

namespace imech {

/// Partial derivatives of a scalar field on space-time.
struct FieldGradient {
  double dt = 0.0;
  Vector dx;
};

/// Central difference step used whenever no exact gradient is available.
double difference_step(double at);

/// Scalar field f(t, x). Gradients are exact for expression-backed and
/// constant fields, and central differences otherwise unless a gradient
/// callback is supplied.
class ScalarField {
 public:
  using ValueFn = std::function<double(const SpacetimePoint&)>;
  using GradientFn = std::function<FieldGradient(const SpacetimePoint&)>;

  ScalarField() = default;

  static ScalarField constant(double value);
  static ScalarField from_function(ValueFn value, GradientFn gradient = {});
  /// `expr` must be bound with slot 0 = t and slots 1..dim = x.
  static ScalarField from_expression(BoundExpression expr);

  double operator()(const SpacetimePoint& pt) const;
  FieldGradient gradient(const SpacetimePoint& pt) const;

  bool valid() const { return static_cast<bool>(value_); }

 private:
  ValueFn value_;
  GradientFn gradient_;
};

/// n-vector valued field on space-time.
class VectorField {
 public:
  using Fn = std::function<Vector(const SpacetimePoint&)>;

  VectorField() = default;
  explicit VectorField(Fn fn) : fn_(std::move(fn)) {}

  static VectorField constant(Vector value);
  static VectorField zero(Eigen::Index dim);
  /// One expression per component, each bound to slots [t, x...].
  static VectorField from_expressions(std::vector<BoundExpression> components);

  Vector operator()(const SpacetimePoint& pt) const;
  bool valid() const { return static_cast<bool>(fn_); }

 private:
  Fn fn_;
};

/// Slot layout shared by every chart expression: t, x1..xn, x1dot..xndot.
class ChartSymbols {
 public:
  ChartSymbols(std::vector<std::string> coordinates, std::map<std::string, double> constants);

  const std::vector<std::string>& coordinates() const { return coordinates_; }
  std::size_t dim() const { return coordinates_.size(); }

  /// Symbols for fields on space-time (t and coordinates).
  SymbolTable position_symbols() const;
  /// Symbols for fields on the velocity space (adds dotted coordinates).
  SymbolTable phase_symbols() const;

  static std::vector<double> slots(const SpacetimePoint& pt);
  static std::vector<double> slots(const SpacetimePoint& pt, const Vector& velocity);

  std::size_t velocity_slot(std::size_t i) const { return 1 + dim() + i; }

 private:
  std::vector<std::string> coordinates_;
  std::map<std::string, double> constants_;
};

}  // namespace imech
