#include "imech/field.hpp"

#include <algorithm>
#include <cmath>

namespace imech {

double difference_step(double at) { return 1e-6 * std::max(1.0, std::abs(at)); }

ScalarField ScalarField::constant(double value) {
  return from_function([value](const SpacetimePoint&) { return value; },
                       [](const SpacetimePoint& pt) { return FieldGradient{0.0, Vector::Zero(pt.dim())}; });
}

ScalarField ScalarField::from_function(ValueFn value, GradientFn gradient) {
  ScalarField f;
  f.value_ = std::move(value);
  f.gradient_ = std::move(gradient);
  return f;
}

ScalarField ScalarField::from_expression(BoundExpression expr) {
  auto value = [expr](const SpacetimePoint& pt) { return expr.evaluate(ChartSymbols::slots(pt)); };
  auto gradient = [expr](const SpacetimePoint& pt) {
    const auto vars = ChartSymbols::slots(pt);
    FieldGradient g{0.0, Vector::Zero(pt.dim())};
    if (expr.depends_on(0)) g.dt = expr.derivative(vars, 0).second;
    for (Eigen::Index i = 0; i < pt.dim(); ++i) {
      const auto slot = static_cast<std::size_t>(i + 1);
      if (expr.depends_on(slot)) g.dx[i] = expr.derivative(vars, slot).second;
    }
    return g;
  };
  return from_function(std::move(value), std::move(gradient));
}

double ScalarField::operator()(const SpacetimePoint& pt) const { return value_(pt); }

FieldGradient ScalarField::gradient(const SpacetimePoint& pt) const {
  if (gradient_) return gradient_(pt);
  FieldGradient g{0.0, Vector::Zero(pt.dim())};
  {
    const double h = difference_step(pt.t);
    SpacetimePoint a = pt, b = pt;
    a.t += h;
    b.t -= h;
    g.dt = (value_(a) - value_(b)) / (2.0 * h);
  }
  for (Eigen::Index i = 0; i < pt.dim(); ++i) {
    const double h = difference_step(pt.x[i]);
    SpacetimePoint a = pt, b = pt;
    a.x[i] += h;
    b.x[i] -= h;
    g.dx[i] = (value_(a) - value_(b)) / (2.0 * h);
  }
  return g;
}

VectorField VectorField::constant(Vector value) {
  return VectorField([value = std::move(value)](const SpacetimePoint&) { return value; });
}

VectorField VectorField::zero(Eigen::Index dim) { return constant(Vector::Zero(dim)); }

VectorField VectorField::from_expressions(std::vector<BoundExpression> components) {
  return VectorField([components = std::move(components)](const SpacetimePoint& pt) {
    const auto vars = ChartSymbols::slots(pt);
    Vector out(static_cast<Eigen::Index>(components.size()));
    for (std::size_t i = 0; i < components.size(); ++i) out[static_cast<Eigen::Index>(i)] = components[i].evaluate(vars);
    return out;
  });
}

Vector VectorField::operator()(const SpacetimePoint& pt) const { return fn_(pt); }

ChartSymbols::ChartSymbols(std::vector<std::string> coordinates, std::map<std::string, double> constants)
    : coordinates_(std::move(coordinates)), constants_(std::move(constants)) {}

SymbolTable ChartSymbols::position_symbols() const {
  SymbolTable table;
  for (const auto& [name, value] : constants_) table.add_constant(name, value);
  table.add_variable("t", 0);
  for (std::size_t i = 0; i < coordinates_.size(); ++i) table.add_variable(coordinates_[i], i + 1);
  return table;
}

SymbolTable ChartSymbols::phase_symbols() const {
  SymbolTable table = position_symbols();
  for (std::size_t i = 0; i < coordinates_.size(); ++i) table.add_variable(coordinates_[i] + "dot", velocity_slot(i));
  return table;
}

std::vector<double> ChartSymbols::slots(const SpacetimePoint& pt) {
  std::vector<double> v(static_cast<std::size_t>(pt.dim()) + 1);
  v[0] = pt.t;
  for (Eigen::Index i = 0; i < pt.dim(); ++i) v[static_cast<std::size_t>(i) + 1] = pt.x[i];
  return v;
}

std::vector<double> ChartSymbols::slots(const SpacetimePoint& pt, const Vector& velocity) {
  std::vector<double> v = slots(pt);
  v.insert(v.end(), velocity.data(), velocity.data() + velocity.size());
  return v;
}

}  // namespace imech
