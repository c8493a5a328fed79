#include "imech/cli.hpp"

#include <cmath>
#include <random>

#include <CLI11.hpp>

#include "imech/output.hpp"

namespace imech {

namespace {

struct UsageError : Error {
  using Error::Error;
};

// Splits on commas outside parentheses.
std::vector<std::string> split_components(const std::string& text) {
  std::vector<std::string> parts(1);
  int depth = 0;
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      parts.emplace_back();
    } else {
      parts.back() += c;
    }
  }
  return parts;
}

Vector parse_vector(const std::string& text, const Scenario& sc, const std::string& option) {
  const auto parts = split_components(text);
  if (parts.size() != sc.coordinates.size()) {
    throw UsageError(option + " needs " + std::to_string(sc.coordinates.size()) + " comma-separated components, got " +
                     std::to_string(parts.size()));
  }
  SymbolTable symbols;
  for (const auto& [name, value] : sc.params) symbols.add_constant(name, value);
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    try {
      v[static_cast<Eigen::Index>(i)] = Expression::parse(parts[i]).bind(symbols).evaluate({});
    } catch (const ExpressionError& e) {
      throw UsageError(option + " component " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return v;
}

// Display form: components negligible against the largest one print as 0.
std::string show(const Vector& v) {
  const double scale = v.size() ? std::max(1.0, v.cwiseAbs().maxCoeff()) : 1.0;
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    double x = v[i];
    if (std::abs(x) < 1e-13 * scale) x = 0.0;
    out += format_number(x);
  }
  return out;
}

std::string show(double x) { return format_number(std::abs(x) < 1e-300 ? 0.0 : x); }

std::string join(const std::vector<std::string>& names) {
  if (names.empty()) return "(none)";
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ",") + n;
  return out;
}

struct Options {
  std::string scenario;
  std::string out_dir = ".";
  bool plot = false;
  std::string p_left;
  std::string active;
  std::string constraint;
  std::size_t random_frames = 0;
  std::uint64_t seed = 1;
  std::string p;
  std::string frame;
  bool canonical = false;
};

int cmd_validate(const Scenario& sc, const Options& opt, std::ostream& out) {
  if (opt.canonical) {
    out << sc.canonical;
    return exit_ok;
  }
  const auto& sys = sc.system();
  out << "valid: " << sc.name << " (" << sc.coordinates.size() << " coordinates, " << sys.positional.size()
      << " positional and " << sys.kinetic.size() << " kinetic constraints)\n";
  return exit_ok;
}

int cmd_run(const Scenario& sc, const Options& opt, std::ostream& out, std::ostream& err) {
  RunResult result;
  int code = exit_ok;
  try {
    result = run(sc.setup);
  } catch (const EventStormError& e) {
    err << "error: " << e.what() << "; writing partial logs\n";
    result = e.partial();
    code = exit_runtime;
  }
  const LogPaths paths = write_logs(result, sc, opt.out_dir);
  if (opt.plot) {
    write_trajectory_csv(out, sc.coordinates, result.samples);
    return code;
  }
  std::vector<std::string> broken(result.broken.begin(), result.broken.end());
  out << "events = " << result.events.size() << '\n';
  out << "end time = " << show(result.samples.back().t) << '\n';
  out << "broken = " << join(broken) << '\n';
  out << "trajectory: " << paths.trajectory.string() << '\n';
  out << "events: " << paths.events.string() << '\n';
  return code;
}

// Random rest frames of the event rows: uniform H projected onto h(f) = 0.
std::vector<NamedFrame> random_rest_frames(const AffineRows& rows, const LocalMetric& g, std::size_t count,
                                           std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-scale, scale);
  std::vector<NamedFrame> frames;
  for (std::size_t i = 0; i < count; ++i) {
    Vector H(rows.D.cols());
    for (Eigen::Index j = 0; j < H.size(); ++j) H[j] = uniform(rng);
    frames.push_back({"random" + std::to_string(i), FrameField::constant(project_affine(g, rows, H).parallel)});
  }
  return frames;
}

int cmd_impact(const Scenario& sc, const Options& opt, std::ostream& out) {
  const auto& sys = sc.system();
  const SpacetimePoint& pt = sc.setup.initial.base;
  const TimelikeVelocity p_left{pt, parse_vector(opt.p_left, sc, "--p-left")};
  EventSpec spec;
  if (!opt.active.empty()) spec.impulse = parse_vector(opt.active, sc, "--active");

  std::string name = opt.constraint;
  if (name.empty()) {
    if (!sys.positional.empty()) {
      name = sys.positional.front().name;
    } else {
      for (const auto& A : sys.kinetic) {
        if (A.kind == KineticKind::permanent) {
          name = A.name;
          break;
        }
      }
    }
  }
  AffineRows rows = AffineRows::empty(sys.dim());
  if (const PositionalConstraint* S = sys.find_positional(name)) {
    spec.kind = EventKind::positional;
    spec.positional = *S;
    spec.members = {S->name};
    rows = positional_rows(*S, pt);
  } else if (const KineticConstraint* A = sys.find_kinetic(name)) {
    if (A->kind != KineticKind::permanent) throw UsageError("'" + name + "' is an instantaneous constraint");
    spec.kind = spec.impulse ? EventKind::scripted : EventKind::kinetic;
    spec.kinetic = A->name;
    rows = kinetic_rows(*A, pt);
  } else if (spec.impulse && name.empty()) {
    spec.kind = EventKind::scripted;
  } else {
    throw UsageError(name.empty() ? "scenario has no constraint to impact" : "no constraint named '" + name + "'");
  }

  std::set<std::string> broken;
  const ImpactEvent ev = handle_event(sys, p_left, spec, broken, sc.setup.integrator);
  const TimelikeVelocity p_right{pt, ev.p_right};

  std::vector<FrameEnergy> table;
  for (const auto& d : ev.frames) table.push_back({d.frame, d.K_left, d.K_right, d.ratio});
  if (opt.plot) {
    write_energy_table(out, table);
    return exit_ok;
  }
  out << "law = " << ev.law << '\n';
  out << "constraints = " << join(ev.constraints) << '\n';
  out << "p_L = " << show(ev.p_left) << '\n';
  out << "I_act = " << show(ev.I_act) << '\n';
  out << "I_react = " << show(ev.I_react) << '\n';
  out << "p_R = " << show(ev.p_right) << '\n';
  out << "broken = " << join(ev.broken) << '\n';
  for (const auto& d : ev.frames) {
    out << "frame " << d.frame << ": K_left = " << show(d.K_left) << ", K_right = " << show(d.K_right)
        << ", ratio = " << (d.ratio ? show(*d.ratio) : std::string("undefined"))
        << ", rest frame = " << (d.rest_frame ? "yes" : "no");
    if (d.residual) out << ", residual = " << show(*d.residual);
    out << '\n';
  }
  if (opt.random_frames > 0 && rows.count() > 0) {
    const LocalMetric g(sys.metric, pt);
    const double scale = 1.0 + p_left.p.cwiseAbs().maxCoeff();
    const auto frames = random_rest_frames(rows, g, opt.random_frames, opt.seed, scale);
    double worst = 0.0;
    std::size_t defined = 0;
    for (const auto& e : energy_restitution_table(p_left, p_right, frames, sys.metric)) {
      if (!e.ratio) continue;
      ++defined;
      worst = std::max(worst, std::abs(*e.ratio - 1.0));
    }
    out << "random rest frames = " << opt.random_frames << " (seed " << opt.seed << "), max |ratio - 1| = "
        << (defined ? show(worst) : std::string("undefined")) << '\n';
  }
  return exit_ok;
}

int cmd_classify(const Scenario& sc, const Options& opt, std::ostream& out) {
  const auto& sys = sc.system();
  const SpacetimePoint& pt = sc.setup.initial.base;
  const TimelikeVelocity p{pt, parse_vector(opt.p, sc, "--p")};
  std::vector<PositionalConstraint> chosen;
  if (!opt.constraint.empty()) {
    const PositionalConstraint* S = sys.find_positional(opt.constraint);
    if (!S) throw UsageError("no positional constraint named '" + opt.constraint + "'");
    chosen.push_back(*S);
  } else {
    for (const auto& S : sys.positional) {
      if (on_constraint(pt, S, sc.setup.integrator.contact_tolerance).on) chosen.push_back(S);
    }
    if (chosen.empty()) chosen = sys.positional;
  }
  if (chosen.empty()) throw UsageError("scenario has no positional constraint");
  const VelocityClass cls = classify_multiple(p, chosen, sys.metric, sc.setup.integrator.classify_tolerance);
  std::vector<std::string> names;
  for (const auto& S : chosen) names.push_back(S.name);
  out << "constraints = " << join(names) << '\n';
  out << "class = " << to_string(cls.side) << '\n';
  Vector margins(static_cast<Eigen::Index>(cls.margins.size()));
  for (std::size_t i = 0; i < cls.margins.size(); ++i) margins[static_cast<Eigen::Index>(i)] = cls.margins[i];
  out << "margins = " << show(margins) << '\n';
  return exit_ok;
}

int cmd_check_frame(const Scenario& sc, const Options& opt, std::ostream& out) {
  const auto& sys = sc.system();
  const FrameField* h = sys.find_frame(opt.frame);
  if (!h) throw UsageError("no frame named '" + opt.frame + "'");
  const double tol = sc.setup.integrator.classify_tolerance;
  for (const auto& S : sys.positional) {
    out << "rest frame of " << S.name << ": " << (is_rest_frame(*h, S, sc.samples, tol) ? "yes" : "no") << '\n';
  }
  for (const auto& A : sys.kinetic) {
    out << "rest frame of " << A.name << ": " << (is_rest_frame_kinetic(*h, A, sc.samples, tol) ? "yes" : "no")
        << '\n';
  }
  return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Event-driven impulsive mechanics", "imech");
  app.require_subcommand(1);
  Options opt;

  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write the trajectory and event log");
  run_cmd->add_option("scenario", opt.scenario, "Scenario file")->required();
  run_cmd->add_option("--out-dir", opt.out_dir, "Directory for the output files");
  run_cmd->add_flag("--plot", opt.plot, "Print the trajectory table instead of the summary");

  auto* impact_cmd = app.add_subcommand("impact", "Resolve one impact at the initial point");
  impact_cmd->add_option("scenario", opt.scenario, "Scenario file")->required();
  impact_cmd->add_option("--p-left", opt.p_left, "Left velocity, comma separated")->required();
  impact_cmd->add_option("--active", opt.active, "Active impulse, comma separated");
  impact_cmd->add_option("--constraint", opt.constraint, "Constraint hit (default: the first one)");
  impact_cmd->add_option("--random-frames", opt.random_frames, "Number of random rest frames to sample");
  impact_cmd->add_option("--seed", opt.seed, "Seed for the random rest frames");
  impact_cmd->add_flag("--plot", opt.plot, "Print the frame energy table");

  auto* classify_cmd = app.add_subcommand("classify", "Classify a velocity at the initial point");
  classify_cmd->add_option("scenario", opt.scenario, "Scenario file")->required();
  classify_cmd->add_option("--p", opt.p, "Velocity, comma separated")->required();
  classify_cmd->add_option("--constraint", opt.constraint, "Positional constraint (default: those in contact)");

  auto* frame_cmd = app.add_subcommand("check-frame", "Test a frame against every constraint");
  frame_cmd->add_option("scenario", opt.scenario, "Scenario file")->required();
  frame_cmd->add_option("--frame", opt.frame, "Frame name")->required();

  auto* validate_cmd = app.add_subcommand("validate", "Load and validate a scenario");
  validate_cmd->add_option("scenario", opt.scenario, "Scenario file")->required();
  validate_cmd->add_flag("--canonical", opt.canonical, "Print the canonical form");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  Scenario sc;
  try {
    sc = load_scenario(opt.scenario);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(sc, opt, out, err);
    if (impact_cmd->parsed()) return cmd_impact(sc, opt, out);
    if (classify_cmd->parsed()) return cmd_classify(sc, opt, out);
    if (frame_cmd->parsed()) return cmd_check_frame(sc, opt, out);
    return cmd_validate(sc, opt, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

}  // namespace imech
