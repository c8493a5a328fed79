#include "imech/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace imech {

namespace {

constexpr double kRegularityRatio = 1e-12;

void check_gram(const Matrix& G) {
  if (G.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(G, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || lo <= kRegularityRatio * hi) {
    throw RegularityError("constraint rows are not linearly independent");
  }
}

VelocitySplit to_split(const TimelikeVelocity& p, Projection proj) {
  return {{p.base, std::move(proj.parallel)}, {p.base, std::move(proj.orthogonal)}, std::move(proj.multipliers)};
}

}  // namespace

AffineRowField AffineRowField::constant(Vector a, double b) {
  return AffineRowField([a = std::move(a), b](const SpacetimePoint&) { return RowValue{a, b}; });
}

bool KineticConstraint::has_inequalities() const {
  return std::any_of(rows.begin(), rows.end(), [](const KineticRow& r) { return r.relation == Relation::greater_equal; });
}

const char* to_string(VelocitySide side) {
  switch (side) {
    case VelocitySide::left: return "LEFT";
    case VelocitySide::tangent: return "TANGENT";
    case VelocitySide::right: return "RIGHT";
  }
  return "?";
}

AffineRows stack(const AffineRows& a, const AffineRows& b) {
  AffineRows out;
  out.D.resize(a.D.rows() + b.D.rows(), std::max(a.D.cols(), b.D.cols()));
  if (a.D.rows()) out.D.topRows(a.D.rows()) = a.D;
  if (b.D.rows()) out.D.bottomRows(b.D.rows()) = b.D;
  out.rate.resize(a.rate.size() + b.rate.size());
  out.rate << a.rate, b.rate;
  return out;
}

AffineRows select_rows(const AffineRows& rows, std::span<const std::size_t> indices) {
  AffineRows out{Matrix(static_cast<Eigen::Index>(indices.size()), rows.D.cols()),
                 Vector(static_cast<Eigen::Index>(indices.size()))};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(indices[i]);
    out.D.row(static_cast<Eigen::Index>(i)) = rows.D.row(r);
    out.rate[static_cast<Eigen::Index>(i)] = rows.rate[r];
  }
  return out;
}

AffineRows positional_rows(const PositionalConstraint& S, const SpacetimePoint& pt) {
  const auto k = static_cast<Eigen::Index>(S.rows.size());
  AffineRows rows{Matrix(k, pt.dim()), Vector(k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    const FieldGradient g = S.rows[static_cast<std::size_t>(i)].f.gradient(pt);
    require_finite(g.dx, "constraint gradient");
    rows.D.row(i) = g.dx.transpose();
    rows.rate[i] = g.dt;
  }
  return rows;
}

AffineRows kinetic_rows(const KineticConstraint& A, const SpacetimePoint& pt, bool include_inequalities) {
  std::vector<RowValue> values;
  for (const auto& row : A.rows) {
    if (row.relation == Relation::equal || include_inequalities) values.push_back(row.row(pt));
  }
  const auto k = static_cast<Eigen::Index>(values.size());
  AffineRows rows{Matrix(k, pt.dim()), Vector(k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    const RowValue& v = values[static_cast<std::size_t>(i)];
    if (v.a.size() != pt.dim()) throw GeometryError("kinetic row '" + A.name + "' has the wrong dimension");
    require_finite(v.a, "kinetic row");
    rows.D.row(i) = v.a.transpose();
    rows.rate[i] = v.b;
  }
  return rows;
}

Projection project_affine(const LocalMetric& g, const AffineRows& rows, const Vector& p) {
  if (rows.count() == 0) return {p, Vector::Zero(p.size()), Vector(0)};
  const Matrix raised = g.raise(Matrix(rows.D.transpose()));
  const Matrix G = rows.D * raised;
  check_gram(G);
  const Vector r = rows.rate + rows.D * p;
  const Vector c = G.ldlt().solve(r);
  Vector orthogonal = raised * c;
  Vector parallel = p - orthogonal;
  return {std::move(parallel), std::move(orthogonal), c};
}

Vector vertical_orthogonal(const LocalMetric& g, const Matrix& D, const Vector& v) {
  return project_affine(g, AffineRows{D, Vector::Zero(D.rows())}, v).orthogonal;
}

Contact on_constraint(const SpacetimePoint& pt, const PositionalConstraint& S, double tol) {
  Contact c;
  c.on = !S.rows.empty();
  for (std::size_t i = 0; i < S.rows.size(); ++i) {
    const double v = S.rows[i].f(pt);
    c.values.push_back(v);
    if (std::abs(v) <= tol) {
      c.active.rows.push_back(i);
    } else {
      c.on = false;
    }
  }
  return c;
}

std::vector<SpacelikeVector> normal_basis(const SpacetimePoint& pt, const PositionalConstraint& S,
                                          const MassMetric& metric) {
  const LocalMetric g(metric, pt);
  const AffineRows rows = positional_rows(S, pt);
  const Matrix raised = g.raise(Matrix(rows.D.transpose()));
  check_gram(rows.D * raised);
  std::vector<SpacelikeVector> out;
  for (Eigen::Index i = 0; i < raised.cols(); ++i) out.push_back({pt, raised.col(i)});
  return out;
}

VelocitySplit split_rows(const TimelikeVelocity& p, const AffineRows& rows, const MassMetric& metric) {
  return to_split(p, project_affine(LocalMetric(metric, p.base), rows, p.p));
}

VelocitySplit split_positional(const TimelikeVelocity& p, const PositionalConstraint& S, const MassMetric& metric) {
  return split_rows(p, positional_rows(S, p.base), metric);
}

VelocitySplit split_kinetic(const TimelikeVelocity& p, const KineticConstraint& A, const MassMetric& metric) {
  return split_rows(p, kinetic_rows(A, p.base), metric);
}

VelocitySplit split_joint(const TimelikeVelocity& p, const PositionalConstraint& S, const KineticConstraint& K,
                          const MassMetric& metric) {
  return split_rows(p, stack(positional_rows(S, p.base), kinetic_rows(K, p.base)), metric);
}

std::vector<double> row_margins(const TimelikeVelocity& p, const PositionalConstraint& S, const MassMetric& metric) {
  const LocalMetric g(metric, p.base);
  std::vector<double> margins;
  for (const auto& row : S.rows) {
    const FieldGradient grad = row.f.gradient(p.base);
    const Vector n = g.raise(grad.dx);
    const double G = grad.dx.dot(n);
    if (!(G > 0.0)) throw RegularityError("constraint '" + S.name + "' has a vanishing gradient");
    const double r = grad.dt + grad.dx.dot(p.p);
    const double c = r / G;
    if (row.exit_direction) {
      const Vector U = (*row.exit_direction)(p.base);
      const double u = g.norm(U);
      if (!(u > 0.0)) throw GeometryError("constraint '" + S.name + "' has a zero exit direction");
      // Phi(c n, U) = c * df(U)
      margins.push_back(c * grad.dx.dot(U) / u);
    } else if (row.orientation) {
      margins.push_back(*row.orientation * r / std::sqrt(G));
    } else {
      throw GeometryError("constraint '" + S.name + "' has a row without orientation");
    }
  }
  return margins;
}

VelocitySide combine_margins(std::span<const double> margins, double tol) {
  bool any_right = false;
  for (double m : margins) {
    if (m < -tol) return VelocitySide::left;
    if (m > tol) any_right = true;
  }
  return any_right ? VelocitySide::right : VelocitySide::tangent;
}

VelocityClass classify(const TimelikeVelocity& p, const PositionalConstraint& S, const MassMetric& metric, double tol) {
  VelocityClass out;
  out.margins = row_margins(p, S, metric);
  out.side = combine_margins(out.margins, tol);
  return out;
}

VelocityClass classify_multiple(const TimelikeVelocity& p, std::span<const PositionalConstraint> constraints,
                                const MassMetric& metric, double tol) {
  AffineRows rows = AffineRows::empty(p.base.dim());
  for (const auto& S : constraints) rows = stack(rows, positional_rows(S, p.base));
  const LocalMetric g(metric, p.base);
  check_gram(rows.D * g.raise(Matrix(rows.D.transpose())));
  VelocityClass out;
  for (const auto& S : constraints) {
    const auto m = row_margins(p, S, metric);
    out.margins.insert(out.margins.end(), m.begin(), m.end());
  }
  out.side = combine_margins(out.margins, tol);
  return out;
}

bool is_rest_frame(const FrameField& h, const PositionalConstraint& S, std::span<const SpacetimePoint> samples,
                   double tol) {
  for (const auto& pt : samples) {
    const Vector H = h.at(pt);
    for (const auto& row : S.rows) {
      const FieldGradient g = row.f.gradient(pt);
      if (!(std::abs(g.dt + g.dx.dot(H)) <= tol)) return false;
    }
  }
  return true;
}

bool is_rest_frame_kinetic(const FrameField& h, const KineticConstraint& A, std::span<const SpacetimePoint> samples,
                           double tol) {
  for (const auto& pt : samples) {
    const Vector H = h.at(pt);
    for (const auto& row : A.rows) {
      const RowValue v = row.row(pt);
      const double r = v.a.dot(H) + v.b;
      const bool ok = row.relation == Relation::equal ? std::abs(r) <= tol : r >= -tol;
      if (!ok) return false;
    }
  }
  return true;
}

KineticCheck satisfies_kinetic(const TimelikeVelocity& p, const KineticConstraint& A, double tol) {
  KineticCheck out;
  for (const auto& row : A.rows) {
    const RowValue v = row.row(p.base);
    const double r = v.a.dot(p.p) + v.b;
    out.margins.push_back(r);
    const bool ok = row.relation == Relation::equal ? std::abs(r) <= tol : r >= -tol;
    if (!ok) out.ok = false;
  }
  return out;
}

double frame_commutation_residual(const TimelikeVelocity& p, const FrameField& h, const PositionalConstraint& S,
                                  const MassMetric& metric) {
  const LocalMetric g(metric, p.base);
  const AffineRows rows = positional_rows(S, p.base);
  const Vector absolute = project_affine(g, rows, p.p).orthogonal;
  const Vector relative = vertical_orthogonal(g, rows.D, p.p - h.at(p.base));
  return g.norm(absolute - relative);
}

PositionalConstraint combine(std::span<const PositionalConstraint> constraints) {
  PositionalConstraint out;
  for (const auto& S : constraints) {
    if (!out.name.empty()) out.name += "+";
    out.name += S.name;
    out.rows.insert(out.rows.end(), S.rows.begin(), S.rows.end());
  }
  return out;
}

PositionalConstraint push_forward(const PositionalConstraint& S, const CoordinateChange& chg) {
  PositionalConstraint out;
  out.name = S.name;
  for (const auto& row : S.rows) {
    LevelSetRow r;
    r.f = push_forward(row.f, chg);
    r.orientation = row.orientation;
    r.unilateral = row.unilateral;
    if (row.exit_direction) r.exit_direction = push_forward_vertical(*row.exit_direction, chg);
    out.rows.push_back(std::move(r));
  }
  if (S.anisotropy) out.anisotropy = push_forward_vertical(*S.anisotropy, chg);
  return out;
}

KineticConstraint push_forward(const KineticConstraint& A, const CoordinateChange& chg) {
  KineticConstraint out = A;
  out.rows.clear();
  for (const auto& row : A.rows) {
    AffineRowField field([row = row.row, chg](const SpacetimePoint& image) {
      const SpacetimePoint pt = chg.preimage(image);
      const RowValue v = row(pt);
      const Matrix J = chg.jacobian(pt.t, pt.x);
      const Vector a = J.transpose().fullPivLu().solve(v.a);
      return RowValue{a, v.b - a.dot(chg.time_column(pt.t, pt.x))};
    });
    out.rows.push_back({std::move(field), row.relation});
  }
  return out;
}

}  // namespace imech
