#pragma once

#include <functional>
#include <span>

#include "imech/error.hpp"
#include "imech/field.hpp"
#include "imech/types.hpp"

namespace imech {

/// Mass matrix g_ij(t, x). Evaluation checks symmetry and finiteness;
/// positive definiteness is checked when a LocalMetric is formed.
class MassMetric {
 public:
  using Fn = std::function<Matrix(const SpacetimePoint&)>;

  MassMetric() = default;
  explicit MassMetric(Fn fn) : fn_(std::move(fn)) {}

  static MassMetric constant(Matrix g);
  static MassMetric diagonal(const Vector& masses);
  static MassMetric identity(Eigen::Index dim);

  Matrix at(const SpacetimePoint& pt) const;
  bool is_positive_definite(const SpacetimePoint& pt) const;

 private:
  Fn fn_;
};

/// The mass matrix at one point, factorized.
class LocalMetric {
 public:
  explicit LocalMetric(Matrix g);
  LocalMetric(const MassMetric& metric, const SpacetimePoint& pt) : LocalMetric(metric.at(pt)) {}

  const Matrix& matrix() const { return g_; }
  double inner(const Vector& a, const Vector& b) const;
  double norm(const Vector& v) const;
  /// g^{-1} applied to a covector (or to each column of a matrix).
  Vector raise(const Vector& covector) const;
  Matrix raise(const Matrix& covectors) const;

 private:
  Matrix g_;
  Eigen::LLT<Matrix> llt_;
};

/// Frame of reference h = d/dt + H^i d/dx^i.
class FrameField {
 public:
  FrameField() = default;
  explicit FrameField(VectorField H) : H_(std::move(H)) {}

  static FrameField constant(Vector H);
  /// h = d/dt.
  static FrameField rest(Eigen::Index dim);

  Vector at(const SpacetimePoint& pt) const { return H_(pt); }
  const VectorField& field() const { return H_; }

 private:
  VectorField H_;
};

/// Acceleration-equivalent force components Z^i(t, x, xdot).
class ForceSection {
 public:
  using Fn = std::function<Vector(const SpacetimePoint&, const Vector&)>;

  ForceSection() = default;
  explicit ForceSection(Fn fn) : fn_(std::move(fn)) {}

  static ForceSection zero(Eigen::Index dim);

  Vector operator()(const SpacetimePoint& pt, const Vector& velocity) const;
  Vector operator()(const TimelikeVelocity& p) const { return (*this)(p.base, p.p); }
  bool valid() const { return static_cast<bool>(fn_); }

 private:
  Fn fn_;
};

/// Admissible coordinate change tbar = t + c, xbar = xbar(t, x).
class CoordinateChange {
 public:
  using Map = std::function<Vector(double, const Vector&)>;
  using JacobianFn = std::function<Matrix(double, const Vector&)>;

  /// `inverse(t, xbar)` receives the original time t. Missing Jacobian or
  /// time column callbacks are replaced by central differences.
  CoordinateChange(double time_shift, Map forward, Map inverse, JacobianFn jacobian = {}, Map time_column = {});

  static CoordinateChange identity();
  /// xbar = A x + v t + b, tbar = t + c.
  static CoordinateChange linear(Matrix A, Vector v, Vector b, double c);

  double time_shift() const { return shift_; }
  Vector forward(double t, const Vector& x) const { return forward_(t, x); }
  Vector inverse(double t, const Vector& xbar) const { return inverse_(t, xbar); }
  /// d xbar / d x.
  Matrix jacobian(double t, const Vector& x) const;
  /// d xbar / d t.
  Vector time_column(double t, const Vector& x) const;

  SpacetimePoint apply(const SpacetimePoint& pt) const;
  SpacetimePoint preimage(const SpacetimePoint& image) const;

  /// Round trip within `tol` and nonsingular Jacobian at every sample.
  void validate(std::span<const SpacetimePoint> samples, double tol = 1e-10) const;

 private:
  double shift_;
  Map forward_;
  Map inverse_;
  JacobianFn jacobian_;
  Map time_column_;
};

double metric_inner(const SpacelikeVector& a, const SpacelikeVector& b, const MassMetric& metric);
SpacelikeVector relativize(const TimelikeVelocity& p, const FrameField& h);
double kinetic_energy(const TimelikeVelocity& p, const FrameField& h, const MassMetric& metric);
TimelikeVelocity shift(const TimelikeVelocity& p, const SpacelikeVector& v);

SpacelikeVector operator+(const SpacelikeVector& a, const SpacelikeVector& b);
SpacelikeVector operator-(const SpacelikeVector& a, const SpacelikeVector& b);
SpacelikeVector operator*(double s, const SpacelikeVector& a);

/// Throws GeometryError unless the base points coincide.
void require_same_base(const SpacetimePoint& a, const SpacetimePoint& b);
/// Throws GeometryError on NaN or infinity.
void require_finite(const Vector& v, const char* what);

SpacetimePoint push_forward(const SpacetimePoint& pt, const CoordinateChange& chg);
SpacelikeVector push_forward(const SpacelikeVector& v, const CoordinateChange& chg);
TimelikeVelocity push_forward(const TimelikeVelocity& p, const CoordinateChange& chg);
FrameField push_forward(const FrameField& h, const CoordinateChange& chg);
MassMetric push_forward(const MassMetric& g, const CoordinateChange& chg);
ScalarField push_forward(const ScalarField& f, const CoordinateChange& chg);
/// Spacelike vector field, transformed by the spatial Jacobian only.
VectorField push_forward_vertical(const VectorField& v, const CoordinateChange& chg);

}  // namespace imech
