#include "imech/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imech {

const PositionalConstraint* MechanicalSystem::find_positional(const std::string& name) const {
  for (const auto& S : positional) {
    if (S.name == name) return &S;
  }
  return nullptr;
}

const KineticConstraint* MechanicalSystem::find_kinetic(const std::string& name) const {
  for (const auto& A : kinetic) {
    if (A.name == name) return &A;
  }
  return nullptr;
}

const FrameField* MechanicalSystem::find_frame(const std::string& name) const {
  for (const auto& f : frames) {
    if (f.name == name) return &f.field;
  }
  return nullptr;
}

LawBinding law_for(const MechanicalSystem& system, const std::string& constraint) {
  if (auto it = system.laws.find(constraint); it != system.laws.end()) return it->second;
  if (const KineticConstraint* A = system.find_kinetic(constraint)) {
    (void)A;
    return {InelasticClamp{}, {}, {}};
  }
  return {IdealReflection{}, {}, {}};
}

const KineticConstraint* permanent_for(const MechanicalSystem& system, const LawBinding& binding,
                                       const std::set<std::string>& broken) {
  if (!binding.permanent.empty()) {
    const KineticConstraint* A = system.find_kinetic(binding.permanent);
    if (!A) throw SimulationError("unknown kinetic constraint '" + binding.permanent + "'");
    return broken.count(A->name) ? nullptr : A;
  }
  const KineticConstraint* only = nullptr;
  for (const auto& A : system.kinetic) {
    if (A.kind != KineticKind::permanent) continue;
    if (only) return nullptr;
    only = &A;
  }
  return only && !broken.count(only->name) ? only : nullptr;
}

namespace {

struct RowRef {
  std::size_t constraint;
  std::size_t row;
  int sign;
};

std::vector<RowRef> monitored_rows(const MechanicalSystem& system, const std::set<std::string>& broken) {
  std::vector<RowRef> refs;
  for (std::size_t c = 0; c < system.positional.size(); ++c) {
    const auto& S = system.positional[c];
    if (broken.count(S.name)) continue;
    for (std::size_t r = 0; r < S.rows.size(); ++r) {
      if (S.rows[r].unilateral && S.rows[r].orientation) refs.push_back({c, r, *S.rows[r].orientation});
    }
  }
  return refs;
}

double phi(const MechanicalSystem& system, const RowRef& ref, const SpacetimePoint& pt) {
  return ref.sign * system.positional[ref.constraint].rows[ref.row].f(pt);
}

// Rows of the listed references grouped into one constraint, members in
// system order.
EventSpec positional_spec(const MechanicalSystem& system, std::vector<RowRef> refs) {
  std::sort(refs.begin(), refs.end(), [](const RowRef& a, const RowRef& b) {
    return a.constraint != b.constraint ? a.constraint < b.constraint : a.row < b.row;
  });
  refs.erase(std::unique(refs.begin(), refs.end(),
                         [](const RowRef& a, const RowRef& b) { return a.constraint == b.constraint && a.row == b.row; }),
             refs.end());
  EventSpec spec;
  spec.kind = EventKind::positional;
  std::vector<PositionalConstraint> parts;
  for (const auto& ref : refs) {
    const auto& S = system.positional[ref.constraint];
    if (parts.empty() || parts.back().name != S.name) {
      parts.push_back({S.name, {}, S.anisotropy});
      spec.members.push_back(S.name);
    }
    parts.back().rows.push_back(S.rows[ref.row]);
  }
  spec.positional = parts.size() == 1 ? parts.front() : combine(parts);
  return spec;
}

double clearance(const MechanicalSystem& system, const std::vector<RowRef>& refs, const SpacetimePoint& pt) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& ref : refs) m = std::min(m, phi(system, ref, pt));
  return m;
}

std::optional<ImpactLocation> immediate_impact(const MechanicalSystem& system, const SimState& state,
                                               const IntegratorConfig& cfg) {
  std::vector<RowRef> touching;
  for (const auto& ref : monitored_rows(system, state.broken)) {
    if (phi(system, ref, state.velocity.base) <= cfg.contact_tolerance) touching.push_back(ref);
  }
  if (touching.empty()) return std::nullopt;
  EventSpec spec = positional_spec(system, touching);
  VelocityClass cls = classify(state.velocity, *spec.positional, system.metric, cfg.classify_tolerance);
  if (cls.side != VelocitySide::left) return std::nullopt;
  return ImpactLocation{state, std::move(spec), std::move(cls)};
}

}  // namespace

SimState smooth_step(const MechanicalSystem& system, const SimState& state, double h, const IntegratorConfig& cfg) {
  (void)cfg;
  const double t = state.velocity.base.t;
  const Vector& x = state.velocity.base.x;
  const Vector& v = state.velocity.p;
  auto accel = [&](double tt, const Vector& xx, const Vector& vv) {
    return system.forces(SpacetimePoint{tt, xx}, vv);
  };
  const Vector k1x = v;
  const Vector k1v = accel(t, x, v);
  const Vector k2x = v + 0.5 * h * k1v;
  const Vector k2v = accel(t + 0.5 * h, x + 0.5 * h * k1x, k2x);
  const Vector k3x = v + 0.5 * h * k2v;
  const Vector k3v = accel(t + 0.5 * h, x + 0.5 * h * k2x, k3x);
  const Vector k4x = v + h * k3v;
  const Vector k4v = accel(t + h, x + h * k3x, k4x);

  SimState next = state;
  next.velocity.base = {t + h, x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)};
  next.velocity.p = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  next.step_index = state.step_index + 1;

  AffineRows rows = AffineRows::empty(system.dim());
  for (const auto& A : system.kinetic) {
    if (A.kind == KineticKind::permanent && !state.broken.count(A.name)) {
      rows = stack(rows, kinetic_rows(A, next.velocity.base));
    }
  }
  if (rows.count()) {
    const Vector residual = rows.rate + rows.D * next.velocity.p;
    next.drift = std::max(next.drift, residual.cwiseAbs().maxCoeff());
    next.velocity.p = project_affine(LocalMetric(system.metric, next.velocity.base), rows, next.velocity.p).parallel;
  }
  require_finite(next.velocity.base.x, "position");
  require_finite(next.velocity.p, "velocity");
  return next;
}

std::optional<ImpactLocation> locate_impact(const MechanicalSystem& system, const SimState& prev, const SimState& next,
                                            double h, const IntegratorConfig& cfg) {
  struct Crossing {
    RowRef ref;
    double tau;
    SimState state;
  };
  const auto refs = monitored_rows(system, prev.broken);
  std::vector<Crossing> crossings;
  for (const auto& ref : refs) {
    const double a = phi(system, ref, prev.velocity.base);
    const double b = phi(system, ref, next.velocity.base);
    if (!(a >= 0.0 && b < 0.0)) continue;
    double lo = 0.0, hi = h;
    SimState lo_state = prev;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      if (hi - lo <= cfg.time_tolerance && std::abs(phi(system, ref, lo_state.velocity.base)) <= cfg.contact_tolerance) {
        converged = true;
        break;
      }
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      SimState s = smooth_step(system, prev, mid, cfg);
      if (phi(system, ref, s.velocity.base) >= 0.0) {
        lo = mid;
        lo_state = std::move(s);
      } else {
        hi = mid;
      }
    }
    if (!converged && std::abs(phi(system, ref, lo_state.velocity.base)) > cfg.contact_tolerance) {
      throw SimulationError("impact localization on '" + system.positional[ref.constraint].name +
                            "' did not converge");
    }
    crossings.push_back({ref, lo, std::move(lo_state)});
  }
  if (crossings.empty()) return std::nullopt;
  const auto first = std::min_element(crossings.begin(), crossings.end(),
                                      [](const Crossing& a, const Crossing& b) { return a.tau < b.tau; });
  const SimState at = first->state;
  std::vector<RowRef> rows;
  for (const auto& c : crossings) {
    if (c.tau - first->tau <= cfg.time_tolerance) rows.push_back(c.ref);
  }
  for (const auto& ref : refs) {
    if (std::abs(phi(system, ref, at.velocity.base)) <= cfg.contact_tolerance) rows.push_back(ref);
  }
  EventSpec spec = positional_spec(system, rows);
  VelocityClass cls = classify(at.velocity, *spec.positional, system.metric, cfg.classify_tolerance);
  return ImpactLocation{at, std::move(spec), std::move(cls)};
}

ImpactEvent handle_event(const MechanicalSystem& system, const TimelikeVelocity& p_left, const EventSpec& spec,
                         std::set<std::string>& broken, const IntegratorConfig& cfg, std::size_t index) {
  ImpactContext ctx;
  ctx.point = p_left.base;
  ctx.metric = &system.metric;
  ctx.tol = cfg.classify_tolerance;
  if (system.forces.valid()) ctx.force = system.forces(p_left);
  ctx.active_impulse = spec.impulse;

  std::optional<LawBinding> binding;
  std::vector<std::string> constraints;
  const KineticConstraint* kinetic = nullptr;
  switch (spec.kind) {
    case EventKind::positional: {
      if (!spec.positional) throw SimulationError("positional event without a constraint");
      ctx.positional = &*spec.positional;
      binding = spec.members.size() > 1
                    ? system.multiple_law.value_or(LawBinding{IdealReflection{}, {}, {}})
                    : law_for(system, spec.members.front());
      ctx.permanent = permanent_for(system, *binding, broken);
      for (const auto& B : system.kinetic) {
        if (B.kind == KineticKind::instantaneous &&
            std::find(spec.members.begin(), spec.members.end(), B.owner) != spec.members.end()) {
          ctx.instantaneous = &B;
          break;
        }
      }
      constraints = spec.members;
      break;
    }
    case EventKind::kinetic:
      kinetic = system.find_kinetic(spec.kinetic);
      if (!kinetic) throw SimulationError("unknown kinetic constraint '" + spec.kinetic + "'");
      binding = law_for(system, kinetic->name);
      ctx.permanent = kinetic;
      constraints = {kinetic->name};
      break;
    case EventKind::scripted:
      if (!spec.kinetic.empty()) {
        kinetic = system.find_kinetic(spec.kinetic);
        if (!kinetic) throw SimulationError("unknown kinetic constraint '" + spec.kinetic + "'");
      } else {
        kinetic = permanent_for(system, LawBinding{}, broken);
      }
      if (kinetic && !broken.count(kinetic->name)) {
        binding = law_for(system, kinetic->name);
        ctx.permanent = kinetic;
        constraints = {kinetic->name};
      } else {
        kinetic = nullptr;
      }
      break;
  }
  if (binding && !binding->rest_frame.empty()) {
    const FrameField* h = system.find_frame(binding->rest_frame);
    if (!h) throw SimulationError("unknown frame '" + binding->rest_frame + "'");
    ctx.rest_frame = *h;
  }

  ImpactResolution res;
  std::string tag;
  if (binding) {
    res = resolve(binding->law, p_left, ctx);
    tag = law_tag(binding->law);
  } else {
    // Free system: the impulse acts unopposed.
    const Vector act = spec.impulse.value_or(Vector::Zero(p_left.p.size()));
    res.active = {p_left.base, act};
    res.reactive = {p_left.base, Vector::Zero(act.size())};
    res.right = {p_left.base, p_left.p + (act + res.reactive.v)};
    tag = "free";
  }

  ImpactEvent ev;
  ev.index = index;
  ev.point = p_left.base;
  ev.p_left = p_left.p;
  ev.I_act = res.active.v;
  ev.I_react = res.reactive.v;
  ev.p_right = res.right.p;
  ev.law = tag;
  ev.constraints = constraints;
  std::set<std::string> newly;
  for (const auto& name : res.broken) {
    if (ctx.positional && name == ctx.positional->name) {
      newly.insert(spec.members.begin(), spec.members.end());
    } else {
      newly.insert(name);
    }
  }
  for (const auto& name : newly) {
    if (broken.insert(name).second) ev.broken.push_back(name);
  }

  const SpacetimePoint samples[] = {p_left.base};
  for (const auto& frame : system.frames) {
    FrameDiagnostic d;
    d.frame = frame.name;
    d.K_left = kinetic_energy(p_left, frame.field, system.metric);
    d.K_right = kinetic_energy(res.right, frame.field, system.metric);
    if (d.K_left > 0.0) d.ratio = d.K_right / d.K_left;
    if (ctx.positional) {
      d.rest_frame = is_rest_frame(frame.field, *ctx.positional, samples, cfg.classify_tolerance);
      d.residual = frame_commutation_residual(p_left, frame.field, *ctx.positional, system.metric);
    } else if (kinetic) {
      d.rest_frame = is_rest_frame_kinetic(frame.field, *kinetic, samples, cfg.classify_tolerance);
    }
    ev.frames.push_back(std::move(d));
  }
  return ev;
}

RunResult run(const SimulationSetup& setup) {
  const MechanicalSystem& system = setup.system;
  const IntegratorConfig& cfg = setup.integrator;
  if (!(cfg.step > 0.0)) throw SimulationError("integrator step must be positive");
  if (setup.initial.p.size() != system.dim() || setup.initial.base.x.size() != system.dim()) {
    throw SimulationError("initial state has the wrong dimension");
  }
  require_finite(setup.initial.base.x, "initial position");
  require_finite(setup.initial.p, "initial velocity");

  RunResult result;
  SimState state{setup.initial, {}, 0, 0.0};
  result.min_clearance = std::numeric_limits<double>::infinity();
  auto track = [&](const SimState& s) {
    result.min_clearance =
        std::min(result.min_clearance, clearance(system, monitored_rows(system, s.broken), s.velocity.base));
    result.max_drift = std::max(result.max_drift, s.drift);
  };
  auto sample = [&](const SimState& s) { result.samples.push_back({s.t(), s.velocity.base.x, s.velocity.p}); };

  std::vector<ScriptedImpulse> impulses = setup.impulses;
  std::stable_sort(impulses.begin(), impulses.end(),
                   [](const ScriptedImpulse& a, const ScriptedImpulse& b) { return a.time < b.time; });
  std::size_t next_impulse = 0;
  while (next_impulse < impulses.size() && impulses[next_impulse].time < state.t() - cfg.time_tolerance) ++next_impulse;

  auto fire = [&](const EventSpec& spec, const TimelikeVelocity& p_left) {
    if (result.events.size() >= cfg.max_events) {
      result.broken = state.broken;
      sample(state);
      throw EventStormError("more than " + std::to_string(cfg.max_events) + " impacts", result);
    }
    ImpactEvent ev = handle_event(system, p_left, spec, state.broken, cfg, result.events.size());
    state.velocity = {p_left.base, ev.p_right};
    result.events.push_back(std::move(ev));
  };

  track(state);
  sample(state);
  double next_sample = state.t() + setup.sample_interval;
  const double end = setup.end_time;
  const double end_slack = 1e-12 * std::max(1.0, std::abs(end));

  while (true) {
    if (next_impulse < impulses.size() && impulses[next_impulse].time <= state.t() + cfg.time_tolerance) {
      const ScriptedImpulse& imp = impulses[next_impulse++];
      if (imp.value.size() != system.dim()) throw SimulationError("scripted impulse has the wrong dimension");
      EventSpec spec;
      spec.kind = EventKind::scripted;
      spec.kinetic = imp.constraint;
      spec.impulse = imp.value;
      fire(spec, state.velocity);
      continue;
    }
    if (auto loc = immediate_impact(system, state, cfg)) {
      fire(loc->spec, state.velocity);
      continue;
    }
    bool clamped = false;
    for (const auto& A : system.kinetic) {
      if (A.kind != KineticKind::permanent || state.broken.count(A.name) || !A.has_inequalities()) continue;
      if (!satisfies_kinetic(state.velocity, A, cfg.drift_tolerance).ok) {
        EventSpec spec;
        spec.kind = EventKind::kinetic;
        spec.kinetic = A.name;
        fire(spec, state.velocity);
        clamped = true;
        break;
      }
    }
    if (clamped) continue;
    if (state.t() >= end - end_slack) break;

    double h = std::min(cfg.step, end - state.t());
    if (next_impulse < impulses.size()) h = std::min(h, impulses[next_impulse].time - state.t());
    h = std::max(h, 0.0);
    if (h == 0.0) {
      if (next_impulse < impulses.size()) continue;
      break;
    }
    SimState next = smooth_step(system, state, h, cfg);
    if (auto loc = locate_impact(system, state, next, h, cfg)) {
      if (loc->classification.side == VelocitySide::left) {
        state = loc->state;
        track(state);
        fire(loc->spec, state.velocity);
        continue;
      }
    }
    for (const auto& ref : monitored_rows(system, next.broken)) {
      if (phi(system, ref, next.velocity.base) < -cfg.penetration_tolerance) {
        throw SimulationError("trajectory penetrates constraint '" + system.positional[ref.constraint].name +
                              "' at t = " + std::to_string(next.t()) + " (persistent contact is not supported)");
      }
    }
    state = std::move(next);
    track(state);
    if (setup.sample_interval <= 0.0) {
      sample(state);
    } else if (state.t() >= next_sample - 1e-9 * setup.sample_interval) {
      sample(state);
      while (next_sample <= state.t() + 1e-9 * setup.sample_interval) next_sample += setup.sample_interval;
    }
  }
  if (result.samples.back().t != state.t() || result.samples.back().v != state.velocity.p) sample(state);
  result.broken = state.broken;
  if (!std::isfinite(result.min_clearance)) result.min_clearance = 0.0;
  return result;
}

}  // namespace imech
