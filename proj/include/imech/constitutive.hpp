#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "imech/constraints.hpp"

namespace imech {

/// Data available to a law at the impact point.
struct ImpactContext {
  SpacetimePoint point;
  const MassMetric* metric = nullptr;
  const PositionalConstraint* positional = nullptr;
  /// Unbroken permanent kinetic constraint in force at the impact.
  const KineticConstraint* permanent = nullptr;
  const KineticConstraint* instantaneous = nullptr;
  std::optional<Vector> active_impulse;
  /// Force section evaluated at p_L.
  std::optional<Vector> force;
  /// Rest frame of the positional constraint, required by friction.
  std::optional<FrameField> rest_frame;
  double tol = 1e-9;
};

/// Magnitudes a law parameter may depend on.
struct LawInputs {
  double vperp = 0.0;  ///< |vperp(p_L)|_Phi
  double vpar = 0.0;   ///< |P_V(p_L - h_S)|_Phi, h_S = d/dt when no rest frame is given
  double force = 0.0;  ///< |Z(p_L)|_Phi
};

/// Constant, or an expression over the variables vperp, vpar and force.
class LawParameter {
 public:
  LawParameter(double value = 0.0);  // NOLINT(google-explicit-constructor)
  /// Identifiers other than vperp, vpar, force must be in `constants`.
  static LawParameter expression(const Expression& expr, const std::map<std::string, double>& constants);

  double operator()(const LawInputs& in) const;
  bool is_constant() const { return !expr_.valid(); }
  double constant_value() const { return value_; }

 private:
  double value_ = 0.0;
  BoundExpression expr_;
};

enum class ReflectionTarget { automatic, positional, with_permanent, with_instantaneous };

struct IdealReflection {
  ReflectionTarget target = ReflectionTarget::automatic;
};
struct NewtonRestitution {
  LawParameter restitution = 1.0;
};
struct TotallyInelastic {};
struct RestFrameFriction {
  LawParameter alpha = -2.0;
  LawParameter beta = 0.0;
  double gain_along = 1.0;
  double gain_across = 1.0;
};
struct KineticIdeal {};
struct BreakableSaturating {
  LawParameter threshold = 1.0;
};
struct BreakableLowSpeed {
  LawParameter threshold = 1.0;
};
struct DiskWallBreakable {
  LawParameter restitution_joint = 1.0;
  LawParameter restitution_positional = 1.0;
  LawParameter threshold = 0.0;
};
struct InelasticClamp {};

using ConstitutiveLaw = std::variant<IdealReflection, NewtonRestitution, TotallyInelastic, RestFrameFriction,
                                     KineticIdeal, BreakableSaturating, BreakableLowSpeed, DiskWallBreakable,
                                     InelasticClamp>;

/// Registry key of a law.
std::string law_tag(const ConstitutiveLaw& law);
/// Every registered key, sorted.
const std::vector<std::string>& law_registry_tags();

struct ImpactResolution {
  SpacelikeVector active;
  SpacelikeVector reactive;
  TimelikeVelocity right;
  std::set<std::string> broken;
  double vperp_left = 0.0;
  double vperp_right = 0.0;
};

/// lambda = 2 Xi^2 / (Xi^2 + n^2); equals 1 exactly at n = Xi.
double saturating_factor(double threshold, double n);
/// lambda = 2 n^2 / (Xi^2 + n^2); equals 1 exactly at n = Xi.
double lowspeed_factor(double threshold, double n);

ImpactResolution ideal_reflection(const TimelikeVelocity& p_left, const ImpactContext& ctx,
                                  ReflectionTarget target = ReflectionTarget::automatic);
ImpactResolution newton_restitution(const TimelikeVelocity& p_left, const ImpactContext& ctx, double restitution);
ImpactResolution totally_inelastic(const TimelikeVelocity& p_left, const ImpactContext& ctx);
ImpactResolution rest_frame_friction(const TimelikeVelocity& p_left, const ImpactContext& ctx,
                                     const RestFrameFriction& law);
ImpactResolution kinetic_ideal_with_active(const TimelikeVelocity& p_left, const ImpactContext& ctx);
ImpactResolution breakable_saturating(const TimelikeVelocity& p_left, const ImpactContext& ctx, double threshold);
ImpactResolution breakable_lowspeed(const TimelikeVelocity& p_left, const ImpactContext& ctx, double threshold);
ImpactResolution disk_wall_breakable(const TimelikeVelocity& p_left, const ImpactContext& ctx, double restitution_joint,
                                     double restitution_positional, double threshold);
ImpactResolution inelastic_clamp_kinetic(const TimelikeVelocity& p_left, const ImpactContext& ctx);

/// Inputs for parameter expressions at this impact.
LawInputs law_inputs(const TimelikeVelocity& p_left, const ImpactContext& ctx);

/// Dispatches on the law and checks the result: an unbroken constraint must not
/// be left with an entering velocity, and kinetic rows enforced by the law must
/// hold. Violations raise LawContractError.
ImpactResolution resolve(const ConstitutiveLaw& law, const TimelikeVelocity& p_left, const ImpactContext& ctx);

struct FrameEnergy {
  std::string frame;
  double left = 0.0;
  double right = 0.0;
  /// K_right / K_left; empty when K_left is zero.
  std::optional<double> ratio;
};

struct NamedFrame {
  std::string name;
  FrameField field;
};

std::vector<FrameEnergy> energy_restitution_table(const TimelikeVelocity& p_left, const TimelikeVelocity& p_right,
                                                  std::span<const NamedFrame> frames, const MassMetric& metric);

}  // namespace imech
