#include "imech/constitutive.hpp"

#include <algorithm>
#include <cmath>

namespace imech {

LawParameter::LawParameter(double value) : value_(value) {}

LawParameter LawParameter::expression(const Expression& expr, const std::map<std::string, double>& constants) {
  SymbolTable symbols;
  for (const auto& [name, value] : constants) symbols.add_constant(name, value);
  symbols.add_variable("vperp", 0);
  symbols.add_variable("vpar", 1);
  symbols.add_variable("force", 2);
  LawParameter p;
  p.expr_ = expr.bind(symbols);
  if (p.expr_.slot_count() == 0) {
    p.value_ = p.expr_.evaluate({});
    p.expr_ = BoundExpression();
  }
  return p;
}

double LawParameter::operator()(const LawInputs& in) const {
  if (!expr_.valid()) return value_;
  const double vars[] = {in.vperp, in.vpar, in.force};
  return expr_.evaluate(vars);
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const MassMetric& require_metric(const ImpactContext& ctx) {
  if (!ctx.metric) throw LawError("impact context has no metric");
  return *ctx.metric;
}

const PositionalConstraint& require_positional(const ImpactContext& ctx) {
  if (!ctx.positional) throw LawError("law needs a positional constraint");
  return *ctx.positional;
}

Vector active_impulse(const TimelikeVelocity& p_left, const ImpactContext& ctx) {
  if (!ctx.active_impulse) return Vector::Zero(p_left.p.size());
  if (ctx.active_impulse->size() != p_left.p.size()) throw LawError("active impulse has the wrong dimension");
  return *ctx.active_impulse;
}

double scaled_tol(const ImpactContext& ctx, const Vector& a, const Vector& b) {
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return ctx.tol * scale;
}

ImpactResolution finish(const TimelikeVelocity& p_left, const Vector& act, const Vector& react,
                        std::set<std::string> broken, double vperp_left, double vperp_right) {
  ImpactResolution out;
  out.active = {p_left.base, act};
  out.reactive = {p_left.base, react};
  out.right = {p_left.base, p_left.p + (act + react)};
  out.broken = std::move(broken);
  out.vperp_left = vperp_left;
  out.vperp_right = vperp_right;
  return out;
}

AffineRows target_rows(const ImpactContext& ctx, ReflectionTarget target, Eigen::Index dim) {
  switch (target) {
    case ReflectionTarget::positional:
      return AffineRows::empty(dim);
    case ReflectionTarget::automatic:
      return ctx.permanent ? kinetic_rows(*ctx.permanent, ctx.point) : AffineRows::empty(dim);
    case ReflectionTarget::with_permanent:
      if (!ctx.permanent) throw LawError("reflection target needs a permanent kinetic constraint");
      return kinetic_rows(*ctx.permanent, ctx.point);
    case ReflectionTarget::with_instantaneous:
      if (!ctx.instantaneous) throw LawError("reflection target needs an instantaneous kinetic constraint");
      return kinetic_rows(*ctx.instantaneous, ctx.point);
  }
  return AffineRows::empty(dim);
}

// Margins of the unilateral rows of S only, indexed like S.rows (bilateral
// rows get 0).
std::vector<double> unilateral_margins(const TimelikeVelocity& v, const PositionalConstraint& S,
                                       const MassMetric& metric) {
  PositionalConstraint only;
  only.name = S.name;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < S.rows.size(); ++i) {
    if (S.rows[i].unilateral) {
      only.rows.push_back(S.rows[i]);
      index.push_back(i);
    }
  }
  std::vector<double> out(S.rows.size(), 0.0);
  const auto m = row_margins(v, only, metric);
  for (std::size_t j = 0; j < m.size(); ++j) out[index[j]] = m[j];
  return out;
}

// One step of a positional law: given the rows currently treated as binding,
// returns the reactive impulse and whether the constraint gives way.
struct Step {
  Vector impulse;
  bool broken = false;
  double vperp = 0.0;
};

// Applies `step` to the entering rows of S (plus the always-binding `extra`
// rows), adding rows that a provisional result would leave entering until
// none remains. Returns the step of the final active set, or a zero impulse
// for a tangent arrival.
template <class StepFn>
Step entering_rows_impulse(const TimelikeVelocity& q, const ImpactContext& ctx, const AffineRows& extra,
                           StepFn&& step) {
  const MassMetric& metric = require_metric(ctx);
  const PositionalConstraint& S = require_positional(ctx);
  const AffineRows rows = positional_rows(S, q.base);
  const auto margins = unilateral_margins(q, S, metric);
  const double tol = ctx.tol;

  std::vector<std::size_t> active;
  bool right = false;
  for (std::size_t i = 0; i < S.rows.size(); ++i) {
    if (!S.rows[i].unilateral || margins[i] < -tol) active.push_back(i);
    if (S.rows[i].unilateral && margins[i] > tol) right = true;
  }
  const bool entering = std::any_of(active.begin(), active.end(), [&](std::size_t i) { return S.rows[i].unilateral; });
  if (!entering) {
    if (right) throw LawError("left velocity exits constraint '" + S.name + "'");
    return {Vector::Zero(q.p.size()), false, 0.0};
  }

  for (std::size_t iteration = 0; iteration <= S.rows.size(); ++iteration) {
    const AffineRows binding = stack(select_rows(rows, active), extra);
    Step s = step(binding);
    if (s.broken) return s;
    const TimelikeVelocity provisional{q.base, q.p + s.impulse};
    const auto after = unilateral_margins(provisional, S, metric);
    bool grew = false;
    for (std::size_t i = 0; i < S.rows.size(); ++i) {
      if (S.rows[i].unilateral && after[i] < -tol && std::find(active.begin(), active.end(), i) == active.end()) {
        active.push_back(i);
        grew = true;
      }
    }
    if (!grew) return s;
    std::sort(active.begin(), active.end());
  }
  throw LawError("entering-row iteration did not settle");
}

double orthogonal_norm(const LocalMetric& g, const AffineRows& rows, const Vector& p) {
  return g.norm(project_affine(g, rows, p).orthogonal);
}

ImpactResolution scaled_reflection(const TimelikeVelocity& p_left, const ImpactContext& ctx, const AffineRows& extra,
                                   double factor) {
  const LocalMetric g(require_metric(ctx), p_left.base);
  const Vector act = active_impulse(p_left, ctx);
  const TimelikeVelocity q{p_left.base, p_left.p + act};
  AffineRows used = extra;
  const Step s = entering_rows_impulse(q, ctx, extra, [&](const AffineRows& rows) {
    const Projection proj = project_affine(g, rows, q.p);
    used = rows;
    return Step{-factor * proj.orthogonal, false, g.norm(proj.orthogonal)};
  });
  const double right = used.count() ? orthogonal_norm(g, used, q.p + s.impulse) : 0.0;
  return finish(p_left, act, s.impulse, {}, s.vperp, right);
}

ImpactResolution breakable(const TimelikeVelocity& p_left, const ImpactContext& ctx, double threshold,
                           double (*factor)(double, double), bool breaks_above) {
  if (!(threshold > 0.0)) throw LawError("breakability threshold must be positive");
  const LocalMetric g(require_metric(ctx), p_left.base);
  const PositionalConstraint& S = require_positional(ctx);
  const Vector act = active_impulse(p_left, ctx);
  const TimelikeVelocity q{p_left.base, p_left.p + act};
  const AffineRows extra = target_rows(ctx, ReflectionTarget::automatic, q.p.size());
  AffineRows used = extra;
  const Step s = entering_rows_impulse(q, ctx, extra, [&](const AffineRows& rows) {
    const Projection proj = project_affine(g, rows, q.p);
    used = rows;
    const double n = g.norm(proj.orthogonal);
    const double lambda = factor(threshold, n);
    const bool broken = breaks_above ? n > threshold : n < threshold;
    return Step{-lambda * proj.orthogonal, broken, n};
  });
  const double right = used.count() ? orthogonal_norm(g, used, q.p + s.impulse) : 0.0;
  std::set<std::string> broken;
  if (s.broken) broken.insert(S.name);
  return finish(p_left, act, s.impulse, std::move(broken), s.vperp, right);
}

void require_in_kinetic(const TimelikeVelocity& p, const KineticConstraint& A, const ImpactContext& ctx) {
  const KineticCheck check = satisfies_kinetic(p, A, scaled_tol(ctx, p.p, p.p));
  for (std::size_t i = 0; i < A.rows.size(); ++i) {
    if (A.rows[i].relation == Relation::equal && !(std::abs(check.margins[i]) <= scaled_tol(ctx, p.p, p.p))) {
      throw LawError("left velocity violates kinetic constraint '" + A.name + "'");
    }
  }
}

}  // namespace

double saturating_factor(double threshold, double n) {
  const double x2 = threshold * threshold;
  const double n2 = n * n;
  return 2.0 * x2 / (x2 + n2);
}

double lowspeed_factor(double threshold, double n) {
  const double x2 = threshold * threshold;
  const double n2 = n * n;
  return 2.0 * n2 / (x2 + n2);
}

ImpactResolution ideal_reflection(const TimelikeVelocity& p_left, const ImpactContext& ctx, ReflectionTarget target) {
  return scaled_reflection(p_left, ctx, target_rows(ctx, target, p_left.p.size()), 2.0);
}

ImpactResolution newton_restitution(const TimelikeVelocity& p_left, const ImpactContext& ctx, double restitution) {
  if (!(restitution >= 0.0 && restitution <= 1.0)) throw LawError("restitution coefficient must lie in [0, 1]");
  return scaled_reflection(p_left, ctx, target_rows(ctx, ReflectionTarget::automatic, p_left.p.size()),
                           1.0 + restitution);
}

ImpactResolution totally_inelastic(const TimelikeVelocity& p_left, const ImpactContext& ctx) {
  return scaled_reflection(p_left, ctx, target_rows(ctx, ReflectionTarget::automatic, p_left.p.size()), 1.0);
}

ImpactResolution rest_frame_friction(const TimelikeVelocity& p_left, const ImpactContext& ctx,
                                     const RestFrameFriction& law) {
  const MassMetric& metric = require_metric(ctx);
  const PositionalConstraint& S = require_positional(ctx);
  if (!ctx.rest_frame) throw LawError("friction needs a rest frame of '" + S.name + "'");
  const SpacetimePoint samples[] = {p_left.base};
  if (!is_rest_frame(*ctx.rest_frame, S, samples, ctx.tol)) {
    throw LawError("friction frame is not a rest frame of '" + S.name + "'");
  }
  const LocalMetric g(metric, p_left.base);
  const Vector act = active_impulse(p_left, ctx);
  const TimelikeVelocity q{p_left.base, p_left.p + act};
  const Vector relative = q.p - ctx.rest_frame->at(q.base);
  const LawInputs inputs = law_inputs(p_left, ctx);
  const double alpha = law.alpha(inputs);
  const double beta = law.beta(inputs);
  std::optional<Vector> direction;
  if (S.anisotropy) {
    Vector L = (*S.anisotropy)(q.base);
    const double norm = g.norm(L);
    if (!(norm > 0.0)) throw LawError("anisotropy direction of '" + S.name + "' vanishes");
    direction = L / norm;
  }
  double vperp_left = 0.0;
  const Step s = entering_rows_impulse(q, ctx, AffineRows::empty(q.p.size()), [&](const AffineRows& rows) {
    const Vector vperp = vertical_orthogonal(g, rows.D, relative);
    const Vector vpar = relative - vperp;
    Vector tangential = vpar;
    if (direction) {
      const Vector along = g.inner(vpar, *direction) * *direction;
      tangential = law.gain_along * along + law.gain_across * (vpar - along);
    }
    vperp_left = g.norm(vperp);
    return Step{alpha * vperp + beta * tangential, false, vperp_left};
  });
  const AffineRows rows = positional_rows(S, q.base);
  const double right = orthogonal_norm(g, rows, q.p + s.impulse);
  return finish(p_left, act, s.impulse, {}, s.vperp, right);
}

ImpactResolution kinetic_ideal_with_active(const TimelikeVelocity& p_left, const ImpactContext& ctx) {
  if (!ctx.active_impulse) throw LawError("kinetic ideal law needs an active impulse");
  const LocalMetric g(require_metric(ctx), p_left.base);
  const Vector act = active_impulse(p_left, ctx);
  Matrix D;
  if (ctx.permanent) {
    require_in_kinetic(p_left, *ctx.permanent, ctx);
    D = kinetic_rows(*ctx.permanent, p_left.base).D;
  } else if (ctx.positional) {
    D = positional_rows(*ctx.positional, p_left.base).D;
  } else {
    throw LawError("kinetic ideal law needs a kinetic or bilateral constraint");
  }
  const Vector react = -vertical_orthogonal(g, D, act);
  return finish(p_left, act, react, {}, g.norm(react), 0.0);
}

ImpactResolution breakable_saturating(const TimelikeVelocity& p_left, const ImpactContext& ctx, double threshold) {
  return breakable(p_left, ctx, threshold, &saturating_factor, true);
}

ImpactResolution breakable_lowspeed(const TimelikeVelocity& p_left, const ImpactContext& ctx, double threshold) {
  return breakable(p_left, ctx, threshold, &lowspeed_factor, false);
}

ImpactResolution disk_wall_breakable(const TimelikeVelocity& p_left, const ImpactContext& ctx, double restitution_joint,
                                     double restitution_positional, double threshold) {
  if (!ctx.permanent) throw LawError("disk/wall law needs a permanent kinetic constraint");
  if (!(threshold >= 0.0)) throw LawError("breakability threshold must be non-negative");
  for (double e : {restitution_joint, restitution_positional}) {
    if (!(e >= 0.0 && e <= 1.0)) throw LawError("restitution coefficient must lie in [0, 1]");
  }
  require_in_kinetic(p_left, *ctx.permanent, ctx);
  const LocalMetric g(require_metric(ctx), p_left.base);
  const Vector act = active_impulse(p_left, ctx);
  const TimelikeVelocity q{p_left.base, p_left.p + act};
  const AffineRows joint = kinetic_rows(*ctx.permanent, q.base);
  const AffineRows none = AffineRows::empty(q.p.size());

  bool above = false;
  double vperp_s = 0.0;
  AffineRows used = none;
  const Step s = entering_rows_impulse(q, ctx, none, [&](const AffineRows& rows) {
    const Projection positional = project_affine(g, rows, q.p);
    vperp_s = g.norm(positional.orthogonal);
    above = vperp_s > threshold;
    if (above) {
      used = rows;
      return Step{-(1.0 + restitution_positional) * positional.orthogonal, false, vperp_s};
    }
    const AffineRows stacked = stack(rows, joint);
    used = stacked;
    const Projection both = project_affine(g, stacked, q.p);
    return Step{-(1.0 + restitution_joint) * both.orthogonal, false, g.norm(both.orthogonal)};
  });
  std::set<std::string> broken;
  if (above) broken.insert(ctx.permanent->name);
  const double right = used.count() ? orthogonal_norm(g, used, q.p + s.impulse) : 0.0;
  return finish(p_left, act, s.impulse, std::move(broken), s.vperp, right);
}

ImpactResolution inelastic_clamp_kinetic(const TimelikeVelocity& p_left, const ImpactContext& ctx) {
  if (!ctx.permanent) throw LawError("clamp law needs a kinetic constraint");
  const KineticConstraint& A = *ctx.permanent;
  const LocalMetric g(require_metric(ctx), p_left.base);
  const Vector act = active_impulse(p_left, ctx);
  const Vector q = p_left.p + act;
  const AffineRows all = kinetic_rows(A, p_left.base, true);
  const double tol = scaled_tol(ctx, q, q);

  std::vector<std::size_t> equalities;
  std::vector<std::size_t> inequalities;
  for (std::size_t i = 0; i < A.rows.size(); ++i) {
    (A.rows[i].relation == Relation::equal ? equalities : inequalities).push_back(i);
  }
  std::vector<std::size_t> working;
  for (std::size_t i : inequalities) {
    if (all.rate[static_cast<Eigen::Index>(i)] + all.D.row(static_cast<Eigen::Index>(i)).dot(q) < -tol) {
      working.push_back(i);
    }
  }

  Vector p = q;
  const std::size_t limit = 4 * A.rows.size() + 4;
  for (std::size_t iteration = 0;; ++iteration) {
    if (iteration > limit) throw LawError("kinetic clamp of '" + A.name + "' did not converge");
    std::vector<std::size_t> binding = equalities;
    binding.insert(binding.end(), working.begin(), working.end());
    Projection proj;
    try {
      proj = project_affine(g, select_rows(all, binding), q);
    } catch (const RegularityError&) {
      throw LawError("kinetic clamp of '" + A.name + "' has an infeasible active set");
    }
    p = proj.parallel;
    // Binding inequalities must push, not pull: multiplier c <= 0.
    std::size_t worst = binding.size();
    double worst_value = 1e-12 * std::max(1.0, proj.multipliers.size() ? proj.multipliers.cwiseAbs().maxCoeff() : 0.0);
    for (std::size_t j = equalities.size(); j < binding.size(); ++j) {
      if (proj.multipliers[static_cast<Eigen::Index>(j)] > worst_value) {
        worst_value = proj.multipliers[static_cast<Eigen::Index>(j)];
        worst = j;
      }
    }
    if (worst < binding.size()) {
      working.erase(std::find(working.begin(), working.end(), binding[worst]));
      continue;
    }
    std::size_t violated = A.rows.size();
    double most = -tol;
    for (std::size_t i : inequalities) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double r = all.rate[static_cast<Eigen::Index>(i)] + all.D.row(static_cast<Eigen::Index>(i)).dot(p);
      if (r < most) {
        most = r;
        violated = i;
      }
    }
    if (violated == A.rows.size()) break;
    working.push_back(violated);
  }
  const Vector react = p - q;
  return finish(p_left, act, react, {}, g.norm(react), 0.0);
}

LawInputs law_inputs(const TimelikeVelocity& p_left, const ImpactContext& ctx) {
  const LocalMetric g(require_metric(ctx), p_left.base);
  const Vector q = p_left.p + active_impulse(p_left, ctx);
  LawInputs in;
  AffineRows rows = AffineRows::empty(q.size());
  if (ctx.positional) {
    rows = positional_rows(*ctx.positional, p_left.base);
  } else if (ctx.permanent) {
    rows = kinetic_rows(*ctx.permanent, p_left.base);
  }
  if (rows.count()) {
    in.vperp = orthogonal_norm(g, rows, q);
    const Vector relative = ctx.rest_frame ? Vector(q - ctx.rest_frame->at(p_left.base)) : q;
    in.vpar = g.norm(relative - vertical_orthogonal(g, rows.D, relative));
  } else {
    in.vpar = g.norm(q);
  }
  if (ctx.force) in.force = g.norm(*ctx.force);
  return in;
}

std::string law_tag(const ConstitutiveLaw& law) {
  return std::visit(overloaded{
                        [](const IdealReflection&) { return std::string("ideal_reflection"); },
                        [](const NewtonRestitution&) { return std::string("newton_restitution"); },
                        [](const TotallyInelastic&) { return std::string("totally_inelastic"); },
                        [](const RestFrameFriction&) { return std::string("rest_frame_friction"); },
                        [](const KineticIdeal&) { return std::string("kinetic_ideal"); },
                        [](const BreakableSaturating&) { return std::string("breakable_saturating"); },
                        [](const BreakableLowSpeed&) { return std::string("breakable_lowspeed"); },
                        [](const DiskWallBreakable&) { return std::string("disk_wall_breakable"); },
                        [](const InelasticClamp&) { return std::string("inelastic_clamp"); },
                    },
                    law);
}

const std::vector<std::string>& law_registry_tags() {
  static const std::vector<std::string> tags = {
      "breakable_lowspeed", "breakable_saturating", "disk_wall_breakable",
      "ideal_reflection",   "inelastic_clamp",      "kinetic_ideal",
      "newton_restitution", "rest_frame_friction",  "totally_inelastic",
  };
  return tags;
}

ImpactResolution resolve(const ConstitutiveLaw& law, const TimelikeVelocity& p_left, const ImpactContext& ctx) {
  if (!same_point(p_left.base, ctx.point)) throw LawError("left velocity is not based at the impact point");
  const LawInputs inputs = law_inputs(p_left, ctx);
  bool enforces_permanent = true;
  bool clamps = false;
  ImpactResolution out = std::visit(
      overloaded{
          [&](const IdealReflection& l) {
            enforces_permanent =
                l.target == ReflectionTarget::automatic || l.target == ReflectionTarget::with_permanent;
            return ideal_reflection(p_left, ctx, l.target);
          },
          [&](const NewtonRestitution& l) { return newton_restitution(p_left, ctx, l.restitution(inputs)); },
          [&](const TotallyInelastic&) { return totally_inelastic(p_left, ctx); },
          [&](const RestFrameFriction& l) {
            enforces_permanent = false;
            return rest_frame_friction(p_left, ctx, l);
          },
          [&](const KineticIdeal&) { return kinetic_ideal_with_active(p_left, ctx); },
          [&](const BreakableSaturating& l) { return breakable_saturating(p_left, ctx, l.threshold(inputs)); },
          [&](const BreakableLowSpeed& l) { return breakable_lowspeed(p_left, ctx, l.threshold(inputs)); },
          [&](const DiskWallBreakable& l) {
            return disk_wall_breakable(p_left, ctx, l.restitution_joint(inputs), l.restitution_positional(inputs),
                                       l.threshold(inputs));
          },
          [&](const InelasticClamp&) {
            clamps = true;
            return inelastic_clamp_kinetic(p_left, ctx);
          },
      },
      law);

  require_finite(out.right.p, "right velocity");
  const double tol = scaled_tol(ctx, p_left.p, out.right.p);
  if (ctx.positional && !out.broken.count(ctx.positional->name)) {
    const auto margins = unilateral_margins(out.right, *ctx.positional, require_metric(ctx));
    if (combine_margins(margins, tol) == VelocitySide::left) {
      throw LawContractError(law_tag(law) + " left an entering velocity at unbroken constraint '" +
                             ctx.positional->name + "'");
    }
  }
  if (ctx.permanent && enforces_permanent && !out.broken.count(ctx.permanent->name)) {
    const KineticCheck check = satisfies_kinetic(out.right, *ctx.permanent, tol);
    for (std::size_t i = 0; i < ctx.permanent->rows.size(); ++i) {
      const bool equality = ctx.permanent->rows[i].relation == Relation::equal;
      const double m = check.margins[i];
      if ((equality && !(std::abs(m) <= tol)) || (clamps && !equality && !(m >= -tol))) {
        throw LawContractError(law_tag(law) + " violates kinetic constraint '" + ctx.permanent->name + "'");
      }
    }
  }
  return out;
}

std::vector<FrameEnergy> energy_restitution_table(const TimelikeVelocity& p_left, const TimelikeVelocity& p_right,
                                                  std::span<const NamedFrame> frames, const MassMetric& metric) {
  std::vector<FrameEnergy> table;
  for (const auto& frame : frames) {
    FrameEnergy e;
    e.frame = frame.name;
    e.left = kinetic_energy(p_left, frame.field, metric);
    e.right = kinetic_energy(p_right, frame.field, metric);
    if (e.left > 0.0) e.ratio = e.right / e.left;
    table.push_back(std::move(e));
  }
  return table;
}

}  // namespace imech
