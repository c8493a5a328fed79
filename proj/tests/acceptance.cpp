// Acceptance gate: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "imech/cli.hpp"
#include "imech/constitutive.hpp"
#include "imech/constraints.hpp"
#include "imech/engine.hpp"
#include "imech/expression.hpp"
#include "imech/scenario.hpp"
#include "oracles.hpp"

using namespace imech;

namespace {

const std::string kDir = IMECH_SCENARIO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Vector parse_csv_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string line_value(const std::string& output, const std::string& key) {
  std::stringstream ss(output);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind(key + " = ", 0) == 0) return line.substr(key.size() + 3);
  }
  return {};
}

PositionalConstraint rod_constraint(double L) {
  LevelSetRow row;
  row.f = ScalarField::from_function(
      [L](const SpacetimePoint& p) { return p.x[1] - L * std::sin(p.x[2]); },
      [L](const SpacetimePoint& p) {
        FieldGradient g{0.0, Vector::Zero(3)};
        g.dx[1] = 1.0;
        g.dx[2] = -L * std::cos(p.x[2]);
        return g;
      });
  row.orientation = 1;
  return {"S", {row}, {}};
}

FrameField random_rest_frame(oracle::Generator& gen) {
  const double a0 = gen.uniform(-3, 3), a1 = gen.uniform(-2, 2), a2 = gen.uniform(-2, 2), a3 = gen.uniform(-2, 2),
               a4 = gen.uniform(-1, 1);
  return FrameField(VectorField([=](const SpacetimePoint& p) {
    Vector H = Vector::Zero(3);
    H[0] = a0 + a1 * std::sin(a2 * p.x[0] + a3 * p.t) + a4 * p.x[1] * p.x[2];
    return H;
  }));
}

ImpactEvent rod_event(const Scenario& sc, double ydot0) {
  std::set<std::string> broken;
  EventSpec spec;
  spec.positional = sc.system().positional.front();
  spec.members = {"S"};
  const TimelikeVelocity p_left{sc.setup.initial.base, Vector::Unit(3, 1) * -ydot0};
  return handle_event(sc.system(), p_left, spec, broken, sc.setup.integrator);
}

Outcome rod_rebound() {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  const int code = run_cli({"impact", kDir + "/rod.scn", "--p-left", "0,-ydot0,0"}, out, err);
  const double elapsed = seconds_since(start);
  if (code != 0) return {false, "exit code " + std::to_string(code) + ": " + err.str()};
  const double ydot0 = load_scenario(kDir + "/rod.scn").params.at("ydot0");
  const Vector p_right = parse_csv_vector(line_value(out.str(), "p_R"));
  Vector expected(3);
  expected << 0.0, ydot0, 0.0;
  const double error = p_right.size() == 3 ? (p_right - expected).cwiseAbs().maxCoeff() : INFINITY;
  return {error <= 1e-12 && elapsed < 1.0, "max|err|=" + fmt(error) + " time=" + fmt(elapsed) + "s"};
}

Outcome frame_invariant_ideality() {
  const Scenario sc = load_scenario(kDir + "/rod.scn");
  const double ydot0 = sc.params.at("ydot0");
  const ImpactEvent ev = rod_event(sc, ydot0);
  const TimelikeVelocity pl{ev.point, ev.p_left}, pr{ev.point, ev.p_right};
  const SpacetimePoint samples[] = {ev.point};
  oracle::Generator gen(2024);
  double rest_err = 0.0;
  bool all_rest = true;
  std::vector<NamedFrame> frames;
  for (int i = 0; i < 100; ++i) frames.push_back({"r" + std::to_string(i), random_rest_frame(gen)});
  for (const auto& e : energy_restitution_table(pl, pr, frames, sc.system().metric)) {
    rest_err = std::max(rest_err, e.ratio ? std::abs(*e.ratio - 1.0) : INFINITY);
  }
  for (const auto& f : frames) all_rest = all_rest && is_rest_frame(f.field, sc.system().positional.front(), samples);

  // h = d/dt + Hx d/dx + c ydot0 d/dy: K ratio (Hx^2 + ydot0^2 (1-c)^2) / (Hx^2 + ydot0^2 (1+c)^2).
  double moving_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double Hx = gen.uniform(-3, 3);
    const double c = gen.sign() * gen.uniform(0.1, 2.0);
    Vector H(3);
    H << Hx, c * ydot0, 0.0;
    const NamedFrame f{"m", FrameField::constant(H)};
    const auto e = energy_restitution_table(pl, pr, std::span(&f, 1), sc.system().metric).front();
    const double predicted = (Hx * Hx + ydot0 * ydot0 * (1 - c) * (1 - c)) / (Hx * Hx + ydot0 * ydot0 * (1 + c) * (1 + c));
    moving_err = std::max(moving_err, e.ratio ? std::abs(*e.ratio - predicted) : INFINITY);
  }
  // Comoving frames at Hx = 0: energy drops to zero after, or rises from zero.
  const NamedFrame h1{"h1", FrameField::constant(Vector::Unit(3, 1) * ydot0)};
  const NamedFrame h2{"h2", FrameField::constant(Vector::Unit(3, 1) * -ydot0)};
  const auto e1 = energy_restitution_table(pl, pr, std::span(&h1, 1), sc.system().metric).front();
  const auto e2 = energy_restitution_table(pl, pr, std::span(&h2, 1), sc.system().metric).front();
  const bool comoving = e1.left > 0 && std::abs(e1.right) <= 1e-12 && std::abs(e2.left) <= 1e-12 && e2.right > 0;
  return {all_rest && rest_err <= 1e-10 && moving_err <= 1e-10 && comoving,
          "rest max|ratio-1|=" + fmt(rest_err) + " non-rest max|err|=" + fmt(moving_err)};
}

Outcome frame_dependent_restitution() {
  const Scenario sc = load_scenario(kDir + "/rod_inelastic.scn");
  const double ydot0 = sc.params.at("ydot0");
  const RunResult result = run(sc.setup);
  if (result.events.empty()) return {false, "no impact in the run"};
  const ImpactEvent& ev = result.events.front();
  const TimelikeVelocity pl{ev.point, ev.p_left}, pr{ev.point, ev.p_right};
  std::vector<NamedFrame> frames;
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) {
    const double Hx = -3.0 + 6.0 * i / 19.0 + 0.01;
    values.push_back(Hx);
    frames.push_back({"Hx" + std::to_string(i), FrameField::constant(Vector::Unit(3, 0) * Hx)});
  }
  const auto table = energy_restitution_table(pl, pr, frames, sc.system().metric);
  double err = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double Hx = values[i];
    const double predicted = Hx * Hx / (Hx * Hx + ydot0 * ydot0);
    err = std::max(err, table[i].ratio ? std::abs(*table[i].ratio - predicted) : INFINITY);
  }
  return {err <= 1e-10, "max|err|=" + fmt(err)};
}

// Linear map composed with a shear x += k sin(y); exact Jacobian and inverse.
CoordinateChange random_chart(oracle::Generator& gen) {
  const Matrix A = gen.invertible(3);
  const Matrix Ainv = A.inverse();
  const Vector v = gen.vector(3), b = gen.vector(3);
  const double k = gen.uniform(-0.5, 0.5), c = gen.uniform(-1, 1);
  auto shear = [k](const Vector& x) {
    Vector s = x;
    s[0] += k * std::sin(x[1]);
    return s;
  };
  return CoordinateChange(
      c, [=](double t, const Vector& x) { return Vector(A * shear(x) + v * t + b); },
      [=](double t, const Vector& xbar) {
        Vector z = Ainv * (xbar - v * t - b);
        z[0] -= k * std::sin(z[1]);
        return z;
      },
      [=](double, const Vector& x) {
        Matrix J = Matrix::Identity(3, 3);
        J(0, 1) = k * std::cos(x[1]);
        return Matrix(A * J);
      },
      [=](double, const Vector&) { return v; });
}

Outcome commutation_residuals() {
  oracle::Generator gen(77);
  double rest_max = 0.0;
  double ratio_min = INFINITY;
  for (int trial = 0; trial < 50; ++trial) {
    const double M = gen.uniform(0.5, 3), L = gen.uniform(0.3, 2), ydot0 = gen.uniform(0.5, 4);
    Vector masses(3);
    masses << M, M, M * L * L / 3.0;
    const MassMetric metric = MassMetric::diagonal(masses);
    const PositionalConstraint S = rod_constraint(L);
    const SpacetimePoint pt{gen.uniform(-1, 1), Vector::Zero(3)};
    SpacetimePoint at = pt;
    at.x << gen.uniform(-1, 1), L, M_PI / 2;
    const TimelikeVelocity p{at, Vector::Unit(3, 1) * -ydot0 + Vector::Unit(3, 0) * gen.uniform(-1, 1)};
    const CoordinateChange chart = random_chart(gen);
    const SpacetimePoint samples[] = {at};
    chart.validate(samples);
    const TimelikeVelocity pbar = push_forward(p, chart);
    const PositionalConstraint Sbar = push_forward(S, chart);
    const MassMetric gbar = push_forward(metric, chart);
    for (int i = 0; i < 2; ++i) {
      const FrameField h = random_rest_frame(gen);
      rest_max = std::max(rest_max, frame_commutation_residual(p, h, S, metric));
      rest_max = std::max(rest_max, frame_commutation_residual(pbar, push_forward(h, chart), Sbar, gbar));
    }
    const double c = gen.sign() * gen.uniform(0.5, 1.5);
    Vector H(3);
    H << gen.uniform(-2, 2), c * ydot0, 0.0;
    const FrameField moving = FrameField::constant(H);
    const double predicted = std::abs(c) * ydot0 * std::sqrt(M);
    ratio_min = std::min(ratio_min, frame_commutation_residual(p, moving, S, metric) / predicted);
    ratio_min = std::min(ratio_min, frame_commutation_residual(pbar, push_forward(moving, chart), Sbar, gbar) / predicted);
  }
  return {rest_max <= 1e-10 && ratio_min >= 0.9,
          "rest max=" + fmt(rest_max) + " non-rest min residual/predicted=" + fmt(ratio_min)};
}

Outcome classification_tables() {
  Vector m = Vector::Constant(3, 2.0);
  const MassMetric metric = MassMetric::diagonal(m);
  auto plane = [](const std::string& name, int axis) {
    LevelSetRow row;
    row.f = ScalarField::from_function([axis](const SpacetimePoint& p) { return p.x[axis]; });
    row.orientation = 1;
    return PositionalConstraint{name, {row}, {}};
  };
  const PositionalConstraint both[] = {plane("Sy", 1), plane("Sz", 2)};
  oracle::Generator gen(5);
  int mismatches = 0;
  int cases = 0;
  for (int sy = -1; sy <= 1; ++sy) {
    for (int sz = -1; sz <= 1; ++sz) {
      const TimelikeVelocity p{{0.0, Vector::Zero(3)}, Vector(3)};
      TimelikeVelocity q = p;
      q.p << gen.uniform(-2, 2), sy * gen.uniform(0.5, 2), sz * gen.uniform(0.5, 2);
      auto single = [](int s) {
        return s < 0 ? VelocitySide::left : s > 0 ? VelocitySide::right : VelocitySide::tangent;
      };
      mismatches += classify(q, both[0], metric).side != single(sy);
      mismatches += classify(q, both[1], metric).side != single(sz);
      VelocitySide expected = VelocitySide::tangent;
      if (sy < 0 || sz < 0) {
        expected = VelocitySide::left;
      } else if (sy > 0 || sz > 0) {
        expected = VelocitySide::right;
      }
      mismatches += classify_multiple(q, both, metric).side != expected;
      cases += 3;
    }
  }
  return {mismatches == 0, std::to_string(cases - mismatches) + "/" + std::to_string(cases) + " cells"};
}

Outcome breakability() {
  const bool unit = saturating_factor(2.5, 2.5) == 1.0 && lowspeed_factor(2.5, 2.5) == 1.0 &&
                    saturating_factor(0.3, 0.3) == 1.0 && lowspeed_factor(7.0, 7.0) == 1.0;
  Vector masses(1);
  masses << 1.0;
  const MassMetric metric = MassMetric::diagonal(masses);
  LevelSetRow row;
  row.f = ScalarField::from_function([](const SpacetimePoint& p) { return p.x[0]; });
  row.orientation = 1;
  const PositionalConstraint S{"S", {row}, {}};
  ImpactContext ctx;
  ctx.point = {0.0, Vector::Zero(1)};
  ctx.metric = &metric;
  ctx.positional = &S;
  oracle::Generator gen(99);
  double err = 0.0;
  int wrong_branch = 0;
  for (int i = 0; i < 1000; ++i) {
    const double Xi = gen.uniform(0.05, 5);
    const double n = Xi * std::exp(gen.uniform(-1.5, 1.5));
    const TimelikeVelocity pl{ctx.point, Vector::Constant(1, -n)};
    const auto sat = breakable_saturating(pl, ctx, Xi);
    const auto low = breakable_lowspeed(pl, ctx, Xi);
    const double lam_sat = 2 * Xi * Xi / (Xi * Xi + n * n);
    const double lam_low = 2 * n * n / (Xi * Xi + n * n);
    err = std::max(err, std::abs(sat.right.p[0] - (-n + lam_sat * n)) / (1 + n));
    err = std::max(err, std::abs(low.right.p[0] - (-n + lam_low * n)) / (1 + n));
    wrong_branch += sat.broken.count("S") != static_cast<std::size_t>(n > Xi);
    wrong_branch += low.broken.count("S") != static_cast<std::size_t>(n < Xi);
  }
  return {unit && err <= 1e-12 && wrong_branch == 0,
          "lambda(Xi)=1 " + std::string(unit ? "yes" : "no") + " max|err|=" + fmt(err) +
              " branch errors=" + std::to_string(wrong_branch)};
}

Outcome disk_wall() {
  const Scenario sc = load_scenario(kDir + "/disk.scn");
  const auto& sys = sc.system();
  const double R = sc.params.at("R"), Xi = sc.params.at("Xi"), M = sc.params.at("M");
  SpacetimePoint at{0.0, Vector(2)};
  at.x << sc.params.at("xw"), 0.3;
  EventSpec spec;
  spec.positional = *sys.find_positional("S");
  spec.members = {"S"};
  const FrameField rest = *sys.find_frame("hA");
  const FrameField h0 = *sys.find_frame("h0");

  // |vperp_S| = sqrt(M) xdot; below and above the threshold.
  const double slow = 0.5 * Xi / std::sqrt(M), fast = 2.0 * Xi / std::sqrt(M);
  std::set<std::string> broken;
  const TimelikeVelocity pl_slow{at, Vector(2)};
  TimelikeVelocity a = pl_slow;
  a.p << slow, -slow / R;
  const ImpactEvent below = handle_event(sys, a, spec, broken, sc.setup.integrator);
  const TimelikeVelocity below_r{at, below.p_right};
  const double row_residual = std::abs(below.p_right[0] + R * below.p_right[1]);
  const double e_below = std::abs(kinetic_energy(below_r, rest, sys.metric) - kinetic_energy(a, rest, sys.metric));
  const bool kept = below.broken.empty() && broken.empty();

  std::set<std::string> broken2;
  TimelikeVelocity b{at, Vector(2)};
  b.p << fast, -fast / R;
  const ImpactEvent above = handle_event(sys, b, spec, broken2, sc.setup.integrator);
  const TimelikeVelocity above_r{at, above.p_right};
  Vector expected = b.p;
  expected[0] = -fast;
  const double reverse_err = (above.p_right - expected).cwiseAbs().maxCoeff();
  const double e_above = std::max(
      std::abs(kinetic_energy(above_r, rest, sys.metric) - kinetic_energy(b, rest, sys.metric)),
      std::abs(kinetic_energy(above_r, h0, sys.metric) - kinetic_energy(b, h0, sys.metric)));
  const bool flagged = broken2.count("A") == 1;
  return {kept && row_residual <= 1e-10 && e_below <= 1e-10 && flagged && reverse_err <= 1e-10 && e_above <= 1e-10,
          "A residual=" + fmt(row_residual) + " A broken above=" + (flagged ? "yes" : "no") +
              " reverse err=" + fmt(reverse_err) + " dK=" + fmt(std::max(e_below, e_above))};
}

Outcome bounce_decay() {
  Scenario sc = load_scenario(kDir + "/ball.scn");
  sc.setup.sample_interval = 0.0;
  const auto start = std::chrono::steady_clock::now();
  const RunResult result = run(sc.setup);
  const double elapsed = seconds_since(start);
  const auto oracle_seq = oracle::bounce_sequence(sc.params.at("z0"), sc.params.at("g"), sc.params.at("e"),
                                                  static_cast<int>(result.events.size()));
  double time_err = 0.0;
  for (std::size_t i = 0; i < result.events.size(); ++i) {
    time_err = std::max(time_err, std::abs(result.events[i].point.t - oracle_seq.impact_times[i]));
  }
  // Apex = highest sample before the first impact, then between consecutive impacts.
  double apex_err = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double lo = k == 0 ? -1.0 : result.events[k - 1].point.t;
    const double hi = result.events[k].point.t;
    double top = -INFINITY;
    for (const auto& s : result.samples) {
      if (s.t >= lo && s.t <= hi) top = std::max(top, s.x[0]);
    }
    apex_err = std::max(apex_err, std::abs(top - oracle_seq.apex_heights[k]));
  }
  const bool count_ok = result.events.size() == 10;
  return {count_ok && time_err <= 1e-6 && apex_err <= 1e-6 && elapsed < 5.0,
          std::to_string(result.events.size()) + " events, time err=" + fmt(time_err) + " apex err=" + fmt(apex_err) +
              " runtime=" + fmt(elapsed) + "s"};
}

Outcome rolling_rows() {
  const Scenario sphere = load_scenario(kDir + "/sphere.scn");
  const KineticConstraint& B = *sphere.system().find_kinetic("B");
  const double R = sphere.params.at("R");
  oracle::Generator gen(8);
  double err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const TimelikeVelocity p{{gen.uniform(-2, 2), gen.vector(6, 3)}, gen.vector(6, 3)};
    const double psi = p.base.x[3], th = p.base.x[4];
    const Vector& v = p.p;
    const double r1 = v[0] - R * v[4] * std::sin(psi) + R * v[5] * std::sin(th) * std::cos(psi);
    const double r2 = v[1] + R * v[4] * std::cos(psi) + R * v[5] * std::sin(th) * std::sin(psi);
    const auto check = satisfies_kinetic(p, B);
    err = std::max({err, std::abs(check.margins[0] - r1), std::abs(check.margins[1] - r2)});
  }
  const Scenario coaster = load_scenario(kDir + "/coaster.scn");
  const KineticConstraint& A = *coaster.system().find_kinetic("A");
  const double Rc = coaster.params.at("R");
  SpacetimePoint at{0.0, Vector::Zero(4)};
  at.x[2] = 0.4;
  auto rolling = [&](double phdot) {
    Vector v(4);
    v << -Rc * phdot * std::cos(0.4), -Rc * phdot * std::sin(0.4), 0.7, phdot;
    return TimelikeVelocity{at, v};
  };
  const bool brake = satisfies_kinetic(rolling(1.0), A).ok && satisfies_kinetic(rolling(0.0), A).ok &&
                     !satisfies_kinetic(rolling(-1.0), A).ok;
  return {err <= 1e-12 && brake, "max|residual err|=" + fmt(err) + " brake " + (brake ? "ok" : "wrong")};
}

Outcome projection_suite() {
  oracle::Generator gen(1234);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index n = gen.integer(2, 7);
    const Eigen::Index k = gen.integer(1, static_cast<int>(n) - 1);
    const Matrix g = gen.spd(n);
    const AffineRows rows{gen.full_rank(k, n), gen.vector(k, 2)};
    const TimelikeVelocity p{{gen.uniform(-1, 1), gen.vector(n)}, gen.vector(n, 3)};
    const MassMetric metric = MassMetric::constant(g);
    const VelocitySplit s = split_rows(p, rows, metric);
    const double scale = 1.0 + p.p.cwiseAbs().maxCoeff();
    const double recon = (s.parallel.p + s.orthogonal.v - p.p).cwiseAbs().maxCoeff();
    const double tangency = (rows.D * s.parallel.p + rows.rate).cwiseAbs().maxCoeff();
    // Orthogonal to every tangent direction: ker D in g.
    const Eigen::FullPivLU<Matrix> lu(rows.D);
    const Matrix kernel = lu.kernel();
    const double ortho = kernel.cols() ? (kernel.transpose() * g * s.orthogonal.v).cwiseAbs().maxCoeff() : 0.0;
    const VelocitySplit again = split_rows(s.parallel, rows, metric);
    const double idem = (again.parallel.p - s.parallel.p).cwiseAbs().maxCoeff();
    const Vector ref = oracle::closest_affine(g, rows.D, rows.rate, p.p);
    const double vs_oracle = (ref - s.parallel.p).cwiseAbs().maxCoeff();
    worst = std::max({worst, recon / scale, tangency / scale, ortho / scale, idem / scale, vs_oracle / scale});
  }
  return {worst <= 1e-10, "worst scaled residual=" + fmt(worst)};
}

Outcome parser() {
  struct Formula {
    std::string text;
    std::vector<std::string> vars;
    std::function<double(const std::vector<double>&)> reference;
  };
  const std::vector<Formula> formulas = {
      {"y - L*sin(th)", {"y", "L", "th"}, [](auto& v) { return v[0] - v[1] * std::sin(v[2]); }},
      {"M*L^2/3", {"M", "L"}, [](auto& v) { return v[0] * v[1] * v[1] / 3.0; }},
      {"xdot - R*thdot*sin(psi) + R*phidot*sin(th)*cos(psi)",
       {"xdot", "R", "thdot", "psi", "phidot", "th"},
       [](auto& v) { return v[0] - v[1] * v[2] * std::sin(v[3]) + v[1] * v[4] * std::sin(v[5]) * std::cos(v[3]); }},
      {"ydot + R*thdot*cos(psi) + R*phidot*sin(th)*sin(psi)",
       {"ydot", "R", "thdot", "psi", "phidot", "th"},
       [](auto& v) { return v[0] + v[1] * v[2] * std::cos(v[3]) + v[1] * v[4] * std::sin(v[5]) * std::sin(v[3]); }},
      {"xdot + R*phidot*sin(th)*cos(psi)",
       {"xdot", "R", "phidot", "th", "psi"},
       [](auto& v) { return v[0] + v[1] * v[2] * std::sin(v[3]) * std::cos(v[4]); }},
      {"xdot + R*phdot*cos(th)", {"xdot", "R", "phdot", "th"}, [](auto& v) { return v[0] + v[1] * v[2] * std::cos(v[3]); }},
      {"I*cos(th)", {"I", "th"}, [](auto& v) { return v[0] * std::cos(v[1]); }},
      {"x - xw", {"x", "xw"}, [](auto& v) { return v[0] - v[1]; }},
      {"-(1 + e)", {"e"}, [](auto& v) { return -(1 + v[0]); }},
      {"2*m*R^2/5", {"m", "R"}, [](auto& v) { return 2 * v[0] * v[1] * v[1] / 5; }},
      {"-v0/R", {"v0", "R"}, [](auto& v) { return -v[0] / v[1]; }},
      {"sqrt(abs(a)) + max(a, b) - min(a, b)^2 + tan(b/4)",
       {"a", "b"},
       [](auto& v) {
         return std::sqrt(std::abs(v[0])) + std::max(v[0], v[1]) - std::pow(std::min(v[0], v[1]), 2) +
                std::tan(v[1] / 4);
       }},
  };
  oracle::Generator gen(11);
  double err = 0.0;
  for (const auto& f : formulas) {
    SymbolTable symbols;
    for (std::size_t i = 0; i < f.vars.size(); ++i) symbols.add_variable(f.vars[i], i);
    const BoundExpression e = Expression::parse(f.text).bind(symbols);
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> v;
      for (std::size_t j = 0; j < f.vars.size(); ++j) v.push_back(gen.uniform(0.1, 3.0) * gen.sign());
      const double ref = f.reference(v);
      err = std::max(err, std::abs(e.evaluate(v) - ref) / std::max(1.0, std::abs(ref)));
    }
  }
  struct Bad {
    std::string text;
    std::size_t offset;
  };
  const std::vector<Bad> bad = {{"1 +", 3}, {"sin(", 4}, {"2 * * 3", 4}, {"x $ y", 2}, {"(1 + 2", 6}, {"foo(1)", 0}};
  int located = 0;
  for (const auto& b : bad) {
    try {
      Expression::parse(b.text);
    } catch (const ExpressionError& e) {
      located += e.begin() == b.offset;
    }
  }
  int unknown = 0;
  try {
    Expression::parse("a + zz").bind(SymbolTable{});
  } catch (const ExpressionError& e) {
    unknown = e.begin() == 0;
  }
  const bool errors_ok = located == static_cast<int>(bad.size()) && unknown == 1;
  return {err <= 1e-12 && errors_ok, "max rel err=" + fmt(err) + " located errors " + std::to_string(located + unknown) +
                                         "/" + std::to_string(bad.size() + 1)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"rod rebound", rod_rebound},
      {"frame-invariant ideality", frame_invariant_ideality},
      {"frame-dependent energy restitution", frame_dependent_restitution},
      {"commutation residuals", commutation_residuals},
      {"classification truth tables", classification_tables},
      {"breakability laws", breakability},
      {"disk-wall law", disk_wall},
      {"bounce decay", bounce_decay},
      {"rolling rows", rolling_rows},
      {"projection suite", projection_suite},
      {"expression parser", parser},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << "  (" << o.detail
              << ")\n";
  }
  return failed == 0 ? 0 : 1;
}
