#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imech/spacetime.hpp"

namespace imech {

/// One level set f(t, x) = 0 of a positional constraint.
struct LevelSetRow {
  ScalarField f;
  /// +1 when f grows towards the exit side, -1 when it decreases.
  std::optional<int> orientation;
  bool unilateral = true;
  /// Overrides the raised gradient as U-perp when present.
  std::optional<VectorField> exit_direction;
};

struct PositionalConstraint {
  std::string name;
  std::vector<LevelSetRow> rows;
  /// Tangent direction of anisotropy; normalized on use.
  std::optional<VectorField> anisotropy;

  std::size_t codimension() const { return rows.size(); }
};

/// Value of an affine velocity row a . xdot + b at one point.
struct RowValue {
  Vector a;
  double b = 0.0;
};

class AffineRowField {
 public:
  using Fn = std::function<RowValue(const SpacetimePoint&)>;

  AffineRowField() = default;
  explicit AffineRowField(Fn fn) : fn_(std::move(fn)) {}

  static AffineRowField constant(Vector a, double b);

  RowValue operator()(const SpacetimePoint& pt) const { return fn_(pt); }

 private:
  Fn fn_;
};

enum class Relation { equal, greater_equal };
enum class KineticKind { permanent, instantaneous };

struct KineticRow {
  AffineRowField row;
  Relation relation = Relation::equal;
};

struct KineticConstraint {
  std::string name;
  std::vector<KineticRow> rows;
  KineticKind kind = KineticKind::permanent;
  /// Owning positional constraint of an instantaneous constraint.
  std::string owner;
  /// Frame in which the rows were authored.
  std::string frame;

  bool has_inequalities() const;
};

enum class VelocitySide { left, tangent, right };

const char* to_string(VelocitySide side);

struct VelocityClass {
  VelocitySide side = VelocitySide::tangent;
  /// Phi(vperp_row, unit U-perp_row) for each classified row.
  std::vector<double> margins;
};

struct ActiveRowSet {
  std::vector<std::size_t> rows;
};

struct Contact {
  bool on = false;
  ActiveRowSet active;
  std::vector<double> values;
};

/// Affine rows D p + rate evaluated at one point; the common currency of every
/// projection below.
struct AffineRows {
  Matrix D;
  Vector rate;

  Eigen::Index count() const { return D.rows(); }
  static AffineRows empty(Eigen::Index dim) { return {Matrix(0, dim), Vector(0)}; }
};

AffineRows stack(const AffineRows& a, const AffineRows& b);
AffineRows select_rows(const AffineRows& rows, std::span<const std::size_t> indices);

/// Tangency rows df/dt + df/dx . p of a positional constraint.
AffineRows positional_rows(const PositionalConstraint& S, const SpacetimePoint& pt);
/// Rows a . p + b. Inequalities are skipped unless `include_inequalities`.
AffineRows kinetic_rows(const KineticConstraint& A, const SpacetimePoint& pt, bool include_inequalities = false);

struct Projection {
  Vector parallel;
  Vector orthogonal;
  Vector multipliers;
};

/// Metric-orthogonal projection of p onto {q : D q + rate = 0}.
/// Throws RegularityError when the rows are (numerically) dependent.
Projection project_affine(const LocalMetric& g, const AffineRows& rows, const Vector& p);
/// Orthogonal part of a spacelike vector with respect to ker D.
Vector vertical_orthogonal(const LocalMetric& g, const Matrix& D, const Vector& v);

struct VelocitySplit {
  TimelikeVelocity parallel;
  SpacelikeVector orthogonal;
  Vector multipliers;
};

Contact on_constraint(const SpacetimePoint& pt, const PositionalConstraint& S, double tol);
std::vector<SpacelikeVector> normal_basis(const SpacetimePoint& pt, const PositionalConstraint& S,
                                          const MassMetric& metric);

VelocitySplit split_rows(const TimelikeVelocity& p, const AffineRows& rows, const MassMetric& metric);
VelocitySplit split_positional(const TimelikeVelocity& p, const PositionalConstraint& S, const MassMetric& metric);
VelocitySplit split_kinetic(const TimelikeVelocity& p, const KineticConstraint& A, const MassMetric& metric);
VelocitySplit split_joint(const TimelikeVelocity& p, const PositionalConstraint& S, const KineticConstraint& K,
                          const MassMetric& metric);

/// Margin of each row taken on its own: Phi(vperp_row, U-perp_row / |U-perp_row|).
/// Throws GeometryError for rows without orientation.
std::vector<double> row_margins(const TimelikeVelocity& p, const PositionalConstraint& S, const MassMetric& metric);

VelocityClass classify(const TimelikeVelocity& p, const PositionalConstraint& S, const MassMetric& metric,
                       double tol = 1e-9);
VelocityClass classify_multiple(const TimelikeVelocity& p, std::span<const PositionalConstraint> constraints,
                                const MassMetric& metric, double tol = 1e-9);
/// Combines per-row margins: LEFT if any < -tol, TANGENT if all within tol, RIGHT otherwise.
VelocitySide combine_margins(std::span<const double> margins, double tol);

bool is_rest_frame(const FrameField& h, const PositionalConstraint& S, std::span<const SpacetimePoint> samples,
                   double tol = 1e-9);
bool is_rest_frame_kinetic(const FrameField& h, const KineticConstraint& A, std::span<const SpacetimePoint> samples,
                           double tol = 1e-9);

struct KineticCheck {
  bool ok = true;
  std::vector<double> margins;
};

KineticCheck satisfies_kinetic(const TimelikeVelocity& p, const KineticConstraint& A, double tol = 1e-9);

/// |P-perp_J(p) - P-perp_V(p - h)|_Phi; vanishes exactly for rest frames of S.
double frame_commutation_residual(const TimelikeVelocity& p, const FrameField& h, const PositionalConstraint& S,
                                  const MassMetric& metric);

/// Union of the rows of several positional constraints, named "a+b".
PositionalConstraint combine(std::span<const PositionalConstraint> constraints);

PositionalConstraint push_forward(const PositionalConstraint& S, const CoordinateChange& chg);
KineticConstraint push_forward(const KineticConstraint& A, const CoordinateChange& chg);

}  // namespace imech
