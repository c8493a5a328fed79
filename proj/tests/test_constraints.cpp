#include <gtest/gtest.h>

#include <cmath>

#include "imech/constraints.hpp"
#include "oracles.hpp"

using namespace imech;

namespace {

SpacetimePoint origin(Eigen::Index n) { return {0.0, Vector::Zero(n)}; }

LevelSetRow coordinate_row(int axis, std::optional<int> orientation = 1) {
  LevelSetRow row;
  row.f = ScalarField::from_function([axis](const SpacetimePoint& p) { return p.x[axis]; },
                                     [axis](const SpacetimePoint& p) {
                                       return FieldGradient{0.0, Vector::Unit(p.dim(), axis)};
                                     });
  row.orientation = orientation;
  return row;
}

PositionalConstraint plane(const std::string& name, int axis, std::optional<int> orientation = 1) {
  return {name, {coordinate_row(axis, orientation)}, {}};
}

// Random affine level set f = c . x + w t + d through the origin.
PositionalConstraint random_plane(oracle::Generator& gen, Eigen::Index n, int rows) {
  PositionalConstraint S{"S", {}, {}};
  const Matrix C = gen.full_rank(rows, n);
  for (int r = 0; r < rows; ++r) {
    const Vector c = C.row(r).transpose();
    const double w = gen.uniform(-1, 1);
    LevelSetRow row;
    row.f = ScalarField::from_function([c, w](const SpacetimePoint& p) { return c.dot(p.x) + w * p.t; },
                                       [c, w](const SpacetimePoint&) { return FieldGradient{w, c}; });
    row.orientation = gen.integer(0, 1) ? 1 : -1;
    S.rows.push_back(row);
  }
  return S;
}

}  // namespace

TEST(Projection, CornerNormalBasis) {
  const MassMetric g = MassMetric::diagonal(Vector::Constant(3, 2.0));
  const PositionalConstraint S{"corner", {coordinate_row(1), coordinate_row(2)}, {}};
  const auto basis = normal_basis(origin(3), S, g);
  ASSERT_EQ(basis.size(), 2u);
  EXPECT_LT((basis[0].v - Vector::Unit(3, 1) * 0.5).norm(), 1e-15);
  EXPECT_LT((basis[1].v - Vector::Unit(3, 2) * 0.5).norm(), 1e-15);
}

TEST(Projection, RegularityFailure) {
  const MassMetric g = MassMetric::identity(3);
  const PositionalConstraint S{"twice", {coordinate_row(1), coordinate_row(1)}, {}};
  EXPECT_THROW(normal_basis(origin(3), S, g), RegularityError);
  const TimelikeVelocity p{origin(3), Vector::Ones(3)};
  EXPECT_THROW(split_positional(p, S, g), RegularityError);
}

TEST(Projection, RandomInstancesMatchOracle) {
  oracle::Generator gen(31);
  for (int i = 0; i < 300; ++i) {
    const Eigen::Index n = gen.integer(2, 6);
    const int k = gen.integer(1, static_cast<int>(n));
    const Matrix gm = gen.spd(n);
    const MassMetric g = MassMetric::constant(gm);
    const PositionalConstraint S = random_plane(gen, n, k);
    const TimelikeVelocity p{{gen.uniform(-1, 1), gen.vector(n)}, gen.vector(n, 3)};
    const VelocitySplit s = split_positional(p, S, g);
    const AffineRows rows = positional_rows(S, p.base);
    const Vector ref = oracle::closest_affine(gm, rows.D, rows.rate, p.p);
    EXPECT_LT((s.parallel.p - ref).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((s.parallel.p + s.orthogonal.v - p.p).cwiseAbs().maxCoeff(), 1e-12);
    // Idempotence: the parallel part splits with zero orthogonal part.
    EXPECT_LT(split_positional(s.parallel, S, g).orthogonal.v.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Projection, OrthogonalPartIsFrameInvariantForRestFrames) {
  oracle::Generator gen(32);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = gen.integer(2, 5);
    const MassMetric g = MassMetric::constant(gen.spd(n));
    const PositionalConstraint S = random_plane(gen, n, 1);
    const TimelikeVelocity p{{0.3, gen.vector(n)}, gen.vector(n, 2)};
    const AffineRows rows = positional_rows(S, p.base);
    // Any H with h(f) = 0 is a rest frame.
    const Vector H = oracle::closest_affine(g.at(p.base), rows.D, rows.rate, gen.vector(n, 3));
    const SpacetimePoint samples[] = {p.base};
    const FrameField h = FrameField::constant(H);
    ASSERT_TRUE(is_rest_frame(h, S, samples));
    EXPECT_LT(frame_commutation_residual(p, h, S, g), 1e-10);
    const FrameField moving = FrameField::constant(H + g.at(p.base).inverse() * rows.D.row(0).transpose());
    EXPECT_FALSE(is_rest_frame(moving, S, samples));
    EXPECT_GT(frame_commutation_residual(p, moving, S, g), 1e-3);
  }
}

TEST(Classify, SingleRowSigns) {
  const MassMetric g = MassMetric::identity(3);
  const PositionalConstraint S = plane("floor", 2);
  TimelikeVelocity p{origin(3), Vector::Zero(3)};
  p.p[2] = -3;
  EXPECT_EQ(classify(p, S, g).side, VelocitySide::left);
  EXPECT_DOUBLE_EQ(classify(p, S, g).margins[0], -3.0);
  p.p[2] = 0;
  EXPECT_EQ(classify(p, S, g).side, VelocitySide::tangent);
  p.p[2] = 1;
  EXPECT_EQ(classify(p, S, g).side, VelocitySide::right);
  p.p[2] = 5e-10;
  EXPECT_EQ(classify(p, S, g).side, VelocitySide::tangent);
}

TEST(Classify, OrientationFlipsSides) {
  const MassMetric g = MassMetric::identity(1);
  TimelikeVelocity p{origin(1), Vector::Constant(1, 1.0)};
  EXPECT_EQ(classify(p, plane("wall", 0, -1), g).side, VelocitySide::left);
  EXPECT_EQ(classify(p, plane("wall", 0, 1), g).side, VelocitySide::right);
}

TEST(Classify, MissingOrientationThrows) {
  const MassMetric g = MassMetric::identity(2);
  const TimelikeVelocity p{origin(2), Vector::Ones(2)};
  EXPECT_THROW(classify(p, plane("bare", 0, std::nullopt), g), GeometryError);
}

TEST(Classify, ExitDirectionOverride) {
  const MassMetric g = MassMetric::identity(2);
  PositionalConstraint S = plane("tilted", 1, std::nullopt);
  S.rows[0].exit_direction = VectorField::constant((Vector(2) << 1, 1).finished());
  TimelikeVelocity p{origin(2), (Vector(2) << 0, -1).finished()};
  EXPECT_EQ(classify(p, S, g).side, VelocitySide::left);
  EXPECT_NEAR(classify(p, S, g).margins[0], -1 / std::sqrt(2.0), 1e-15);
}

TEST(Classify, MultipleReducesToSingle) {
  oracle::Generator gen(33);
  const MassMetric g = MassMetric::constant(gen.spd(3));
  const PositionalConstraint S = random_plane(gen, 3, 1);
  for (int i = 0; i < 50; ++i) {
    const TimelikeVelocity p{origin(3), gen.vector(3)};
    const auto one = classify(p, S, g);
    const auto many = classify_multiple(p, std::span(&S, 1), g);
    EXPECT_EQ(one.side, many.side);
    EXPECT_EQ(one.margins, many.margins);
  }
}

TEST(Classify, CornerOrBranch) {
  const MassMetric g = MassMetric::identity(3);
  const PositionalConstraint corner[] = {plane("Sy", 1), plane("Sz", 2)};
  TimelikeVelocity p{origin(3), (Vector(3) << 0, -1, 1).finished()};
  EXPECT_EQ(classify_multiple(p, corner, g).side, VelocitySide::left);
  p.p << 0, 0, 1;
  EXPECT_EQ(classify_multiple(p, corner, g).side, VelocitySide::right);
  p.p << 0, 0, 0;
  EXPECT_EQ(classify_multiple(p, corner, g).side, VelocitySide::tangent);
  const PositionalConstraint twice[] = {plane("a", 1), plane("b", 1)};
  EXPECT_THROW(classify_multiple(p, twice, g), RegularityError);
}

TEST(Classify, CombineMargins) {
  const double none[] = {0.0, 1e-12};
  const double mixed[] = {1.0, -1.0};
  const double right[] = {0.0, 2.0};
  EXPECT_EQ(combine_margins(none, 1e-9), VelocitySide::tangent);
  EXPECT_EQ(combine_margins(mixed, 1e-9), VelocitySide::left);
  EXPECT_EQ(combine_margins(right, 1e-9), VelocitySide::right);
  EXPECT_STREQ(to_string(VelocitySide::left), "LEFT");
}

TEST(Contact, ActiveRows) {
  const PositionalConstraint S{"corner", {coordinate_row(0), coordinate_row(1)}, {}};
  SpacetimePoint pt = origin(2);
  pt.x[1] = 0.5;
  const Contact c = on_constraint(pt, S, 1e-9);
  EXPECT_FALSE(c.on);
  ASSERT_EQ(c.active.rows.size(), 1u);
  EXPECT_EQ(c.active.rows[0], 0u);
  EXPECT_TRUE(on_constraint(origin(2), S, 1e-9).on);
}

TEST(Kinetic, SatisfiesAndRestFrames) {
  // xdot + R thdot = 0 for a disk of radius 0.5, plus thdot >= 0.
  KineticConstraint A{"A", {}, KineticKind::permanent, "", ""};
  A.rows.push_back({AffineRowField::constant((Vector(2) << 1, 0.5).finished(), 0.0), Relation::equal});
  A.rows.push_back({AffineRowField::constant((Vector(2) << 0, 1).finished(), 0.0), Relation::greater_equal});
  EXPECT_TRUE(A.has_inequalities());
  const SpacetimePoint pt = origin(2);
  EXPECT_TRUE(satisfies_kinetic({pt, (Vector(2) << -0.5, 1).finished()}, A).ok);
  EXPECT_FALSE(satisfies_kinetic({pt, (Vector(2) << 0.5, -1).finished()}, A).ok);
  EXPECT_FALSE(satisfies_kinetic({pt, (Vector(2) << 0.5, 1).finished()}, A).ok);
  const SpacetimePoint samples[] = {pt};
  EXPECT_TRUE(is_rest_frame_kinetic(FrameField::rest(2), A, samples));
  EXPECT_FALSE(is_rest_frame_kinetic(FrameField::constant(Vector::Unit(2, 1)), A, samples));
  const AffineRows eq = kinetic_rows(A, pt);
  const AffineRows all = kinetic_rows(A, pt, true);
  EXPECT_EQ(eq.count(), 1);
  EXPECT_EQ(all.count(), 2);
}

TEST(Kinetic, SplitKineticMatchesOracle) {
  oracle::Generator gen(34);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = gen.integer(2, 6);
    const int k = gen.integer(1, static_cast<int>(n) - 1);
    const Matrix gm = gen.spd(n);
    const Matrix D = gen.full_rank(k, n);
    const Vector b = gen.vector(k);
    KineticConstraint A{"A", {}, KineticKind::permanent, "", ""};
    for (int r = 0; r < k; ++r) A.rows.push_back({AffineRowField::constant(D.row(r).transpose(), b[r]), Relation::equal});
    const TimelikeVelocity p{origin(n), gen.vector(n, 2)};
    const VelocitySplit s = split_kinetic(p, A, MassMetric::constant(gm));
    EXPECT_LT((s.parallel.p - oracle::closest_affine(gm, D, b, p.p)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(satisfies_kinetic(s.parallel, A, 1e-10).ok);
  }
}

TEST(Constraints, CombineJoinsNames) {
  const PositionalConstraint parts[] = {plane("a", 0), plane("b", 1)};
  const PositionalConstraint c = combine(parts);
  EXPECT_EQ(c.name, "a+b");
  EXPECT_EQ(c.codimension(), 2u);
}

TEST(Constraints, PushForwardKeepsMargins) {
  oracle::Generator gen(35);
  for (int i = 0; i < 30; ++i) {
    const MassMetric g = MassMetric::constant(gen.spd(3));
    const PositionalConstraint S = random_plane(gen, 3, 1);
    const CoordinateChange chg = CoordinateChange::linear(gen.invertible(3), gen.vector(3), gen.vector(3), 0.2);
    const TimelikeVelocity p{{0.1, gen.vector(3)}, gen.vector(3)};
    const auto before = classify(p, S, g).margins[0];
    const auto after = classify(push_forward(p, chg), push_forward(S, chg), push_forward(g, chg)).margins[0];
    EXPECT_NEAR(before, after, 1e-10);
  }
}
