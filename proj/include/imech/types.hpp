#pragma once

#include <Eigen/Dense>

namespace imech {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Admissible coordinates (t, x^1..x^n) of a point of the configuration
/// space-time.
struct SpacetimePoint {
  double t = 0.0;
  Vector x;

  Eigen::Index dim() const { return x.size(); }
};

/// Exact equality of base points. Values are copied around, never recomputed,
/// so bitwise comparison is the intended test.
bool same_point(const SpacetimePoint& a, const SpacetimePoint& b);

/// Absolute velocity d/dt + p^i d/dx^i. The unit time component is implicit
/// and never stored.
struct TimelikeVelocity {
  SpacetimePoint base;
  Vector p;
};

/// Vertical vector V^i d/dx^i with zero time component. Relative velocities
/// and impulses live here.
struct SpacelikeVector {
  SpacetimePoint base;
  Vector v;
};

}  // namespace imech
