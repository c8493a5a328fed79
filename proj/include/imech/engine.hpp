#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "imech/constitutive.hpp"

namespace imech {

struct IntegratorConfig {
  double step = 1e-3;
  double time_tolerance = 1e-10;
  std::size_t max_events = 1000;
  double drift_tolerance = 1e-9;
  double penetration_tolerance = 1e-8;
  /// |f| accepted at a located impact point.
  double contact_tolerance = 1e-9;
  double classify_tolerance = 1e-9;
};

struct LawBinding {
  ConstitutiveLaw law;
  /// Permanent kinetic constraint handed to the law; empty selects the only
  /// permanent constraint of the system, if there is exactly one.
  std::string permanent;
  /// Frame passed as rest frame (friction).
  std::string rest_frame;
};

struct ScriptedImpulse {
  double time = 0.0;
  Vector value;
  /// Kinetic constraint reacting to the impulse; empty selects the only
  /// permanent constraint, or none.
  std::string constraint;
};

struct MechanicalSystem {
  std::vector<std::string> coordinates;
  MassMetric metric;
  ForceSection forces;
  std::vector<PositionalConstraint> positional;
  std::vector<KineticConstraint> kinetic;
  /// Keyed by constraint name.
  std::map<std::string, LawBinding> laws;
  /// Law for simultaneous impacts on several constraints.
  std::optional<LawBinding> multiple_law;
  std::vector<NamedFrame> frames;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(coordinates.size()); }
  const PositionalConstraint* find_positional(const std::string& name) const;
  const KineticConstraint* find_kinetic(const std::string& name) const;
  const FrameField* find_frame(const std::string& name) const;
};

struct SimState {
  TimelikeVelocity velocity;
  std::set<std::string> broken;
  std::size_t step_index = 0;
  /// Largest kinetic row residual removed by post-stabilization so far.
  double drift = 0.0;

  double t() const { return velocity.base.t; }
};

struct FrameDiagnostic {
  std::string frame;
  double K_left = 0.0;
  double K_right = 0.0;
  std::optional<double> ratio;
  bool rest_frame = false;
  /// Commutation residual at positional events.
  std::optional<double> residual;
};

struct ImpactEvent {
  std::size_t index = 0;
  SpacetimePoint point;
  Vector p_left;
  Vector I_act;
  Vector I_react;
  Vector p_right;
  std::string law;
  std::vector<std::string> constraints;
  std::vector<std::string> broken;
  std::vector<FrameDiagnostic> frames;
};

struct Sample {
  double t = 0.0;
  Vector x;
  Vector v;
};

struct RunResult {
  std::vector<Sample> samples;
  std::vector<ImpactEvent> events;
  std::set<std::string> broken;
  double max_drift = 0.0;
  /// Smallest oriented value s*f over monitored rows at accepted states.
  double min_clearance = 0.0;
};

/// More impacts than IntegratorConfig::max_events. Carries the partial run.
class EventStormError : public SimulationError {
 public:
  EventStormError(const std::string& message, RunResult partial)
      : SimulationError(message), partial_(std::move(partial)) {}
  const RunResult& partial() const { return partial_; }

 private:
  RunResult partial_;
};

struct SimulationSetup {
  MechanicalSystem system;
  TimelikeVelocity initial;
  double end_time = 1.0;
  IntegratorConfig integrator;
  /// Trajectory cadence; non-positive records every step.
  double sample_interval = 0.0;
  std::vector<ScriptedImpulse> impulses;
};

enum class EventKind { positional, kinetic, scripted };

struct EventSpec {
  EventKind kind = EventKind::positional;
  /// Rows in contact, combined from `members`.
  std::optional<PositionalConstraint> positional;
  std::vector<std::string> members;
  /// Kinetic constraint of a kinetic or scripted event.
  std::string kinetic;
  std::optional<Vector> impulse;
};

/// One RK4 step of xddot = Z(t, x, xdot) followed by projection of the velocity
/// onto the unbroken permanent kinetic equality rows.
SimState smooth_step(const MechanicalSystem& system, const SimState& state, double h, const IntegratorConfig& cfg);

struct ImpactLocation {
  SimState state;
  EventSpec spec;
  VelocityClass classification;
};

/// Earliest crossing of a monitored row during the step of size h from `prev`
/// (whose full result is `next`), located by bisection on partial steps.
std::optional<ImpactLocation> locate_impact(const MechanicalSystem& system, const SimState& prev, const SimState& next,
                                            double h, const IntegratorConfig& cfg);

/// Builds the impact context for `spec` and resolves it with the bound law.
/// Adds newly broken constraints to `broken`.
ImpactEvent handle_event(const MechanicalSystem& system, const TimelikeVelocity& p_left, const EventSpec& spec,
                         std::set<std::string>& broken, const IntegratorConfig& cfg, std::size_t index = 0);

RunResult run(const SimulationSetup& setup);

/// Law bound to a constraint, or the built-in default for its kind.
LawBinding law_for(const MechanicalSystem& system, const std::string& constraint);
/// Permanent kinetic constraint used alongside `binding`, if any.
const KineticConstraint* permanent_for(const MechanicalSystem& system, const LawBinding& binding,
                                       const std::set<std::string>& broken);

}  // namespace imech
