#include "imech/spacetime.hpp"

#include <cmath>
#include <string>

namespace imech {

bool same_point(const SpacetimePoint& a, const SpacetimePoint& b) {
  return a.t == b.t && a.x.size() == b.x.size() && (a.x.array() == b.x.array()).all();
}

void require_same_base(const SpacetimePoint& a, const SpacetimePoint& b) {
  if (!same_point(a, b)) throw GeometryError("vectors are based at different points");
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw GeometryError(std::string(what) + " has non-finite components");
}

MassMetric MassMetric::constant(Matrix g) {
  return MassMetric([g = std::move(g)](const SpacetimePoint&) { return g; });
}

MassMetric MassMetric::diagonal(const Vector& masses) { return constant(masses.asDiagonal().toDenseMatrix()); }

MassMetric MassMetric::identity(Eigen::Index dim) { return constant(Matrix::Identity(dim, dim)); }

Matrix MassMetric::at(const SpacetimePoint& pt) const {
  Matrix g = fn_(pt);
  if (g.rows() != pt.dim() || g.cols() != pt.dim()) {
    throw GeometryError("mass matrix is " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                        ", expected " + std::to_string(pt.dim()) + "x" + std::to_string(pt.dim()));
  }
  if (!g.allFinite()) throw GeometryError("mass matrix has non-finite entries");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw GeometryError("mass matrix is not symmetric");
  return g;
}

bool MassMetric::is_positive_definite(const SpacetimePoint& pt) const {
  try {
    LocalMetric local(at(pt));
    return true;
  } catch (const GeometryError&) {
    return false;
  }
}

LocalMetric::LocalMetric(Matrix g) : g_(std::move(g)), llt_(g_) {
  if (llt_.info() != Eigen::Success) throw GeometryError("mass matrix is not positive definite");
  const Vector d = llt_.matrixL().toDenseMatrix().diagonal();
  if ((d.array() <= 0.0).any()) throw GeometryError("mass matrix is not positive definite");
}

double LocalMetric::inner(const Vector& a, const Vector& b) const { return a.dot(g_ * b); }

double LocalMetric::norm(const Vector& v) const { return std::sqrt(std::max(0.0, inner(v, v))); }

Vector LocalMetric::raise(const Vector& covector) const { return llt_.solve(covector); }

Matrix LocalMetric::raise(const Matrix& covectors) const { return llt_.solve(covectors); }

FrameField FrameField::constant(Vector H) { return FrameField(VectorField::constant(std::move(H))); }

FrameField FrameField::rest(Eigen::Index dim) { return FrameField(VectorField::zero(dim)); }

ForceSection ForceSection::zero(Eigen::Index dim) {
  return ForceSection([dim](const SpacetimePoint&, const Vector&) { return Vector(Vector::Zero(dim)); });
}

Vector ForceSection::operator()(const SpacetimePoint& pt, const Vector& velocity) const {
  Vector z = fn_(pt, velocity);
  require_finite(z, "force section");
  return z;
}

CoordinateChange::CoordinateChange(double time_shift, Map forward, Map inverse, JacobianFn jacobian, Map time_column)
    : shift_(time_shift),
      forward_(std::move(forward)),
      inverse_(std::move(inverse)),
      jacobian_(std::move(jacobian)),
      time_column_(std::move(time_column)) {}

CoordinateChange CoordinateChange::identity() {
  return CoordinateChange(
      0.0, [](double, const Vector& x) { return x; }, [](double, const Vector& x) { return x; },
      [](double, const Vector& x) { return Matrix(Matrix::Identity(x.size(), x.size())); },
      [](double, const Vector& x) { return Vector(Vector::Zero(x.size())); });
}

CoordinateChange CoordinateChange::linear(Matrix A, Vector v, Vector b, double c) {
  const Matrix Ainv = A.inverse();
  return CoordinateChange(
      c, [=](double t, const Vector& x) { return Vector(A * x + v * t + b); },
      [=](double t, const Vector& xbar) { return Vector(Ainv * (xbar - v * t - b)); },
      [=](double, const Vector&) { return A; }, [=](double, const Vector&) { return v; });
}

Matrix CoordinateChange::jacobian(double t, const Vector& x) const {
  if (jacobian_) return jacobian_(t, x);
  Matrix J(x.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = difference_step(x[j]);
    Vector a = x, b = x;
    a[j] += h;
    b[j] -= h;
    J.col(j) = (forward_(t, a) - forward_(t, b)) / (2.0 * h);
  }
  return J;
}

Vector CoordinateChange::time_column(double t, const Vector& x) const {
  if (time_column_) return time_column_(t, x);
  const double h = difference_step(t);
  return (forward_(t + h, x) - forward_(t - h, x)) / (2.0 * h);
}

SpacetimePoint CoordinateChange::apply(const SpacetimePoint& pt) const { return {pt.t + shift_, forward_(pt.t, pt.x)}; }

SpacetimePoint CoordinateChange::preimage(const SpacetimePoint& image) const {
  const double t = image.t - shift_;
  return {t, inverse_(t, image.x)};
}

void CoordinateChange::validate(std::span<const SpacetimePoint> samples, double tol) const {
  for (const auto& pt : samples) {
    const Vector back = inverse_(pt.t, forward_(pt.t, pt.x));
    if ((back - pt.x).cwiseAbs().maxCoeff() > tol * std::max(1.0, pt.x.cwiseAbs().maxCoeff())) {
      throw GeometryError("coordinate change does not invert at a sampled point");
    }
    Eigen::FullPivLU<Matrix> lu(jacobian(pt.t, pt.x));
    if (!lu.isInvertible()) throw GeometryError("coordinate change has a singular Jacobian");
  }
}

double metric_inner(const SpacelikeVector& a, const SpacelikeVector& b, const MassMetric& metric) {
  require_same_base(a.base, b.base);
  const double value = a.v.dot(metric.at(a.base) * b.v);
  if (!std::isfinite(value)) throw GeometryError("metric inner product is not finite");
  return value;
}

SpacelikeVector relativize(const TimelikeVelocity& p, const FrameField& h) {
  const Vector H = h.at(p.base);
  require_finite(H, "frame");
  return {p.base, p.p - H};
}

double kinetic_energy(const TimelikeVelocity& p, const FrameField& h, const MassMetric& metric) {
  const SpacelikeVector v = relativize(p, h);
  return 0.5 * metric_inner(v, v, metric);
}

TimelikeVelocity shift(const TimelikeVelocity& p, const SpacelikeVector& v) {
  require_same_base(p.base, v.base);
  return {p.base, p.p + v.v};
}

SpacelikeVector operator+(const SpacelikeVector& a, const SpacelikeVector& b) {
  require_same_base(a.base, b.base);
  return {a.base, a.v + b.v};
}

SpacelikeVector operator-(const SpacelikeVector& a, const SpacelikeVector& b) {
  require_same_base(a.base, b.base);
  return {a.base, a.v - b.v};
}

SpacelikeVector operator*(double s, const SpacelikeVector& a) { return {a.base, s * a.v}; }

namespace {

Matrix checked_jacobian(const CoordinateChange& chg, const SpacetimePoint& pt) {
  Matrix J = chg.jacobian(pt.t, pt.x);
  Eigen::FullPivLU<Matrix> lu(J);
  if (!lu.isInvertible()) throw GeometryError("coordinate change has a singular Jacobian");
  return J;
}

}  // namespace

SpacetimePoint push_forward(const SpacetimePoint& pt, const CoordinateChange& chg) { return chg.apply(pt); }

SpacelikeVector push_forward(const SpacelikeVector& v, const CoordinateChange& chg) {
  return {chg.apply(v.base), checked_jacobian(chg, v.base) * v.v};
}

TimelikeVelocity push_forward(const TimelikeVelocity& p, const CoordinateChange& chg) {
  return {chg.apply(p.base), chg.time_column(p.base.t, p.base.x) + checked_jacobian(chg, p.base) * p.p};
}

FrameField push_forward(const FrameField& h, const CoordinateChange& chg) {
  return FrameField(VectorField([h, chg](const SpacetimePoint& image) {
    const SpacetimePoint pt = chg.preimage(image);
    return Vector(chg.time_column(pt.t, pt.x) + checked_jacobian(chg, pt) * h.at(pt));
  }));
}

MassMetric push_forward(const MassMetric& g, const CoordinateChange& chg) {
  return MassMetric([g, chg](const SpacetimePoint& image) {
    const SpacetimePoint pt = chg.preimage(image);
    const Matrix Jinv = checked_jacobian(chg, pt).inverse();
    const Matrix out = Jinv.transpose() * g.at(pt) * Jinv;
    return Matrix(0.5 * (out + out.transpose()));
  });
}

ScalarField push_forward(const ScalarField& f, const CoordinateChange& chg) {
  auto value = [f, chg](const SpacetimePoint& image) { return f(chg.preimage(image)); };
  auto gradient = [f, chg](const SpacetimePoint& image) {
    const SpacetimePoint pt = chg.preimage(image);
    const FieldGradient g = f.gradient(pt);
    const Matrix J = checked_jacobian(chg, pt);
    // Row covector transforms by J^{-1} from the right.
    const Vector dx = J.transpose().fullPivLu().solve(g.dx);
    return FieldGradient{g.dt - dx.dot(chg.time_column(pt.t, pt.x)), dx};
  };
  return ScalarField::from_function(std::move(value), std::move(gradient));
}

VectorField push_forward_vertical(const VectorField& v, const CoordinateChange& chg) {
  return VectorField([v, chg](const SpacetimePoint& image) {
    const SpacetimePoint pt = chg.preimage(image);
    return Vector(checked_jacobian(chg, pt) * v(pt));
  });
}

}  // namespace imech
