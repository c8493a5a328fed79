#include <gtest/gtest.h>

#include <cmath>

#include "imech/field.hpp"
#include "imech/spacetime.hpp"
#include "oracles.hpp"

using namespace imech;

namespace {

SpacetimePoint point(double t, std::initializer_list<double> x) {
  Vector v(static_cast<Eigen::Index>(x.size()));
  Eigen::Index i = 0;
  for (double c : x) v[i++] = c;
  return {t, v};
}

CoordinateChange random_linear(oracle::Generator& gen, Eigen::Index n) {
  return CoordinateChange::linear(gen.invertible(n), gen.vector(n), gen.vector(n), gen.uniform(-1, 1));
}

// Polar-like chart on the half plane x > 0: (r, a) = (|x|, atan2(y, x)) rotating with time.
CoordinateChange rotating_polar(double omega) {
  return CoordinateChange(
      0.0,
      [omega](double t, const Vector& x) {
        Vector out(2);
        out << std::hypot(x[0], x[1]), std::atan2(x[1], x[0]) - omega * t;
        return out;
      },
      [omega](double t, const Vector& xb) {
        Vector out(2);
        out << xb[0] * std::cos(xb[1] + omega * t), xb[0] * std::sin(xb[1] + omega * t);
        return out;
      });
}

}  // namespace

TEST(MassMetric, RejectsBadMatrices) {
  Matrix g(2, 2);
  g << 1, 2, 2, 1;
  EXPECT_THROW(LocalMetric{g}, GeometryError);
  g << 1, 0.5, 0.4, 1;
  EXPECT_THROW(MassMetric::constant(g).at(point(0, {0, 0})), GeometryError);
  g << 1, 0, 0, NAN;
  EXPECT_THROW(MassMetric::constant(g).at(point(0, {0, 0})), GeometryError);
  EXPECT_THROW(MassMetric::identity(3).at(point(0, {0, 0})), GeometryError);
  EXPECT_FALSE(MassMetric::diagonal(Vector::Constant(2, -1.0)).is_positive_definite(point(0, {0, 0})));
  EXPECT_TRUE(MassMetric::diagonal(Vector::Constant(2, 2.0)).is_positive_definite(point(0, {0, 0})));
}

TEST(LocalMetric, InnerAndRaise) {
  oracle::Generator gen(1);
  const Matrix g = gen.spd(4);
  const LocalMetric m(g);
  const Vector a = gen.vector(4), b = gen.vector(4);
  EXPECT_NEAR(m.inner(a, b), a.dot(g * b), 1e-12);
  EXPECT_NEAR(m.norm(a), std::sqrt(a.dot(g * a)), 1e-12);
  EXPECT_LT((g * m.raise(a) - a).norm(), 1e-12);
}

TEST(Spacetime, KineticEnergyOfRelativeVelocity) {
  const auto pt = point(0.5, {1, 2});
  const MassMetric g = MassMetric::diagonal((Vector(2) << 2, 3).finished());
  const TimelikeVelocity p{pt, (Vector(2) << 1, -1).finished()};
  const FrameField h = FrameField::constant((Vector(2) << 0.5, 1).finished());
  EXPECT_DOUBLE_EQ(relativize(p, h).v[0], 0.5);
  EXPECT_DOUBLE_EQ(kinetic_energy(p, h, g), 0.5 * (2 * 0.25 + 3 * 4));
  EXPECT_DOUBLE_EQ(kinetic_energy(p, FrameField::rest(2), g), 0.5 * (2 + 3));
}

TEST(Spacetime, BaseMismatchRejected) {
  const MassMetric g = MassMetric::identity(2);
  const SpacelikeVector a{point(0, {0, 0}), Vector::Ones(2)};
  const SpacelikeVector b{point(0, {0, 1}), Vector::Ones(2)};
  EXPECT_THROW(metric_inner(a, b, g), GeometryError);
  EXPECT_THROW(a + b, GeometryError);
  EXPECT_NO_THROW(a - a);
}

TEST(Spacetime, ShiftAddsImpulse) {
  const TimelikeVelocity p{point(0, {0, 0}), Vector::Ones(2)};
  const TimelikeVelocity q = shift(p, {p.base, Vector::Constant(2, 2.0)});
  EXPECT_EQ(q.p, Vector::Constant(2, 3.0));
}

TEST(CoordinateChange, LinearRoundTripAndValidate) {
  oracle::Generator gen(2);
  const CoordinateChange chg = random_linear(gen, 3);
  const SpacetimePoint pt = point(0.3, {1, -2, 0.5});
  const SpacetimePoint img = chg.apply(pt);
  EXPECT_NEAR(img.t, pt.t + chg.time_shift(), 1e-15);
  EXPECT_LT((chg.preimage(img).x - pt.x).norm(), 1e-12);
  const SpacetimePoint samples[] = {pt};
  EXPECT_NO_THROW(chg.validate(samples));
  const CoordinateChange bad(
      0.0, [](double, const Vector& x) { return Vector(2 * x); }, [](double, const Vector& x) { return x; });
  EXPECT_THROW(bad.validate(samples), GeometryError);
}

TEST(CoordinateChange, FiniteDifferenceJacobianMatchesPolar) {
  const CoordinateChange chg = rotating_polar(0.7);
  const double t = 0.4;
  const Vector x = (Vector(2) << 1.2, 0.5).finished();
  const double r = x.norm();
  Matrix J(2, 2);
  J << x[0] / r, x[1] / r, -x[1] / (r * r), x[0] / (r * r);
  EXPECT_LT((chg.jacobian(t, x) - J).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(chg.time_column(t, x)[1], -0.7, 1e-8);
}

// Kinetic energy is a scalar: the same in every chart when all objects move together.
TEST(CoordinateChange, KineticEnergyInvariant) {
  oracle::Generator gen(4);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index n = gen.integer(1, 5);
    const CoordinateChange chg = random_linear(gen, n);
    const MassMetric g = MassMetric::constant(gen.spd(n));
    const SpacetimePoint pt{gen.uniform(-1, 1), gen.vector(n)};
    const TimelikeVelocity p{pt, gen.vector(n, 3)};
    const FrameField h = FrameField::constant(gen.vector(n));
    const double K = kinetic_energy(p, h, g);
    const double Kbar = kinetic_energy(push_forward(p, chg), push_forward(h, chg), push_forward(g, chg));
    EXPECT_NEAR(K, Kbar, 1e-10 * (1 + K));
  }
}

TEST(CoordinateChange, NonlinearChartPreservesEnergy) {
  const CoordinateChange chg = rotating_polar(0.3);
  const MassMetric g = MassMetric::diagonal(Vector::Constant(2, 1.5));
  const TimelikeVelocity p{point(0.2, {1.0, 0.4}), (Vector(2) << 0.3, -0.8).finished()};
  const FrameField h = FrameField::rest(2);
  EXPECT_NEAR(kinetic_energy(p, h, g), kinetic_energy(push_forward(p, chg), push_forward(h, chg), push_forward(g, chg)),
              1e-7);
}

TEST(CoordinateChange, ScalarFieldValuesAndGradient) {
  oracle::Generator gen(5);
  const CoordinateChange chg = random_linear(gen, 2);
  const ScalarField f = ScalarField::from_function(
      [](const SpacetimePoint& p) { return p.x[0] * p.x[0] + std::sin(p.x[1]) + p.t; },
      [](const SpacetimePoint& p) {
        return FieldGradient{1.0, (Vector(2) << 2 * p.x[0], std::cos(p.x[1])).finished()};
      });
  const ScalarField fbar = push_forward(f, chg);
  const SpacetimePoint pt = point(0.3, {0.4, -0.2});
  const SpacetimePoint img = chg.apply(pt);
  EXPECT_NEAR(fbar(img), f(pt), 1e-12);
  // Rate of change along a velocity is chart independent: f_t + df(p).
  const TimelikeVelocity p{pt, (Vector(2) << 0.7, 1.1).finished()};
  const TimelikeVelocity pbar = push_forward(p, chg);
  const FieldGradient g = f.gradient(pt);
  const FieldGradient gbar = fbar.gradient(img);
  EXPECT_NEAR(g.dt + g.dx.dot(p.p), gbar.dt + gbar.dx.dot(pbar.p), 1e-10);
}

TEST(ScalarField, ExpressionGradientIsExact) {
  ChartSymbols chart({"x", "y"}, {{"L", 2.0}});
  const auto e = Expression::parse("y - L*sin(x) + t^2").bind(chart.position_symbols());
  const ScalarField f = ScalarField::from_expression(e);
  const SpacetimePoint pt = point(0.5, {0.3, 1.0});
  const FieldGradient g = f.gradient(pt);
  EXPECT_DOUBLE_EQ(g.dt, 1.0);
  EXPECT_DOUBLE_EQ(g.dx[0], -2.0 * std::cos(0.3));
  EXPECT_DOUBLE_EQ(g.dx[1], 1.0);
}

TEST(ScalarField, FiniteDifferenceFallback) {
  const ScalarField f = ScalarField::from_function([](const SpacetimePoint& p) { return std::exp(p.x[0]) * p.t; });
  const FieldGradient g = f.gradient(point(2.0, {0.5}));
  EXPECT_NEAR(g.dx[0], 2.0 * std::exp(0.5), 1e-7);
  EXPECT_NEAR(g.dt, std::exp(0.5), 1e-7);
}

TEST(ForceSection, RejectsNonFinite) {
  const ForceSection z([](const SpacetimePoint&, const Vector& v) { return Vector(v / 0.0); });
  EXPECT_THROW(z(point(0, {0}), Vector::Ones(1)), GeometryError);
  EXPECT_EQ(ForceSection::zero(2)(point(0, {0, 0}), Vector::Ones(2)), Vector::Zero(2));
}
