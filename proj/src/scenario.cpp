#include "imech/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace imech {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ValidationError((path.empty() ? std::string("<root>") : path) + ": " + message);
}

std::string key_path(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) fail(key_path(path, key), "unknown key");
  }
}

const json& require(const json& obj, const std::string& path, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(key_path(path, key), "missing required key");
  return *it;
}

const json* optional(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "expected a finite number");
  return d;
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

const json& as_array(const json& v, const std::string& path, std::optional<std::size_t> size = std::nullopt) {
  if (!v.is_array()) fail(path, "expected an array");
  if (size && v.size() != *size) {
    fail(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

Expression as_expression(const json& v, const std::string& path) {
  if (v.is_number()) return Expression::constant(as_number(v, path));
  if (!v.is_string()) fail(path, "expected an expression string or a number");
  try {
    return Expression::parse(v.get<std::string>());
  } catch (const ExpressionError& e) {
    fail(path, e.what());
  }
}

BoundExpression bind_checked(const Expression& e, const SymbolTable& symbols, const std::string& path) {
  try {
    return e.bind(symbols);
  } catch (const ExpressionError& err) {
    fail(path, err.what());
  }
}

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

const std::set<std::string>& reserved_names() {
  static const std::set<std::string> names = {"t",   "pi",  "sin",   "cos",  "tan",   "sqrt",
                                              "abs", "min", "max",   "vperp", "vpar", "force"};
  return names;
}

double evaluate_checked(const BoundExpression& e, std::span<const double> vars, const std::string& path) {
  double v = 0.0;
  try {
    v = e.evaluate(vars);
  } catch (const ExpressionError& err) {
    fail(path, err.what());
  }
  if (!std::isfinite(v)) fail(path, "expression is not finite");
  return v;
}

struct LawSpec {
  std::set<std::string> keys;
};

const std::map<std::string, LawSpec>& law_specs() {
  static const std::map<std::string, LawSpec> specs = {
      {"ideal_reflection", {{"target"}}},
      {"newton_restitution", {{"restitution"}}},
      {"totally_inelastic", {{}}},
      {"rest_frame_friction", {{"alpha", "beta", "restitution", "mu", "gain_along", "gain_across"}}},
      {"kinetic_ideal", {{}}},
      {"breakable_saturating", {{"threshold"}}},
      {"breakable_lowspeed", {{"threshold"}}},
      {"disk_wall_breakable", {{"restitution_joint", "restitution_positional", "threshold"}}},
      {"inelastic_clamp", {{}}},
  };
  return specs;
}

std::string registry_list() {
  std::string out;
  for (const auto& tag : law_registry_tags()) {
    if (!out.empty()) out += ", ";
    out += tag;
  }
  return out;
}

class Loader {
 public:
  explicit Loader(const json& root) : root_(root) {}

  Scenario load() {
    check_keys(root_, "",
               {"name", "description", "params", "chart", "metric", "forces", "constraints", "laws", "frames",
                "initial", "integrator", "outputs", "impulses", "samples"});
    sc_.name = root_.contains("name") ? as_string(root_["name"], "name") : "scenario";
    sc_.description = root_.contains("description") ? as_string(root_["description"], "description") : "";
    canon_["name"] = sc_.name;
    canon_["description"] = sc_.description;

    load_params();
    load_chart();
    load_initial();
    load_metric();
    load_forces();
    load_frames();
    load_constraints();
    load_laws();
    load_integrator();
    load_outputs();
    load_impulses();
    load_samples();
    validate_initial();

    sc_.canonical = canon_.dump(2) + "\n";
    return std::move(sc_);
  }

 private:
  std::size_t n() const { return sc_.coordinates.size(); }
  MechanicalSystem& sys() { return sc_.setup.system; }

  SymbolTable constants() const {
    SymbolTable s;
    for (const auto& [k, v] : sc_.params) s.add_constant(k, v);
    return s;
  }

  double constant_expression(const json& v, const std::string& path, json& canon_out) {
    const Expression e = as_expression(v, path);
    canon_out = e.canonical();
    return evaluate_checked(bind_checked(e, constants(), path), {}, path);
  }

  Vector constant_vector(const json& v, const std::string& path, json& canon_out) {
    as_array(v, path, n());
    Vector out(static_cast<Eigen::Index>(n()));
    canon_out = json::array();
    for (std::size_t i = 0; i < n(); ++i) {
      json c;
      out[static_cast<Eigen::Index>(i)] = constant_expression(v[i], index_path(path, i), c);
      canon_out.push_back(c);
    }
    return out;
  }

  std::vector<BoundExpression> field_components(const json& v, const std::string& path, const SymbolTable& symbols,
                                                json& canon_out) {
    as_array(v, path, n());
    std::vector<BoundExpression> out;
    canon_out = json::array();
    for (std::size_t i = 0; i < n(); ++i) {
      const Expression e = as_expression(v[i], index_path(path, i));
      canon_out.push_back(e.canonical());
      out.push_back(bind_checked(e, symbols, index_path(path, i)));
    }
    return out;
  }

  void load_params() {
    canon_["params"] = json::object();
    const json* p = optional(root_, "params");
    if (!p) return;
    if (!p->is_object()) fail("params", "expected an object");
    std::map<std::string, Expression> pending;
    for (const auto& [name, value] : p->items()) {
      const std::string path = key_path("params", name);
      if (!is_identifier(name)) fail(path, "not a valid identifier");
      if (reserved_names().count(name)) fail(path, "name is reserved");
      const Expression e = as_expression(value, path);
      canon_["params"][name] = value.is_number() ? json(value.get<double>()) : json(e.canonical());
      pending.emplace(name, e);
    }
    while (!pending.empty()) {
      bool progress = false;
      for (auto it = pending.begin(); it != pending.end();) {
        const auto ids = it->second.identifiers();
        const bool ready = std::all_of(ids.begin(), ids.end(), [&](const std::string& id) {
          return id == "pi" || sc_.params.count(id);
        });
        if (!ready) {
          ++it;
          continue;
        }
        const std::string path = key_path("params", it->first);
        sc_.params[it->first] = evaluate_checked(bind_checked(it->second, constants(), path), {}, path);
        it = pending.erase(it);
        progress = true;
      }
      if (!progress) {
        const auto& [name, e] = *pending.begin();
        for (const auto& id : e.identifiers()) {
          if (id != "pi" && !p->contains(id)) fail(key_path("params", name), "unknown identifier '" + id + "'");
        }
        fail(key_path("params", name), "cyclic parameter definition");
      }
    }
  }

  void load_chart() {
    const json& chart = require(root_, "", "chart");
    check_keys(chart, "chart", {"coordinates"});
    const json& coords = as_array(require(chart, "chart", "coordinates"), "chart.coordinates");
    if (coords.empty()) fail("chart.coordinates", "at least one coordinate is required");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const std::string path = index_path("chart.coordinates", i);
      const std::string name = as_string(coords[i], path);
      if (!is_identifier(name)) fail(path, "not a valid identifier");
      if (reserved_names().count(name)) fail(path, "name is reserved");
      if (sc_.params.count(name)) fail(path, "coordinate shadows parameter '" + name + "'");
      if (!seen.insert(name).second) fail(path, "duplicate coordinate '" + name + "'");
      sc_.coordinates.push_back(name);
    }
    for (const auto& name : sc_.coordinates) {
      if (seen.count(name + "dot") || sc_.params.count(name + "dot")) {
        fail("chart.coordinates", "name '" + name + "dot' is ambiguous");
      }
    }
    chart_ = std::make_unique<ChartSymbols>(sc_.coordinates, sc_.params);
    sys().coordinates = sc_.coordinates;
    canon_["chart"] = {{"coordinates", sc_.coordinates}};
  }

  void load_initial() {
    const json& init = require(root_, "", "initial");
    check_keys(init, "initial", {"t", "x", "xdot"});
    json c = json::object();
    const double t = init.contains("t") ? as_number(init["t"], "initial.t") : 0.0;
    c["t"] = t;
    json cx, cv;
    const Vector x = constant_vector(require(init, "initial", "x"), "initial.x", cx);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(n()));
    if (init.contains("xdot")) {
      v = constant_vector(init["xdot"], "initial.xdot", cv);
    } else {
      cv = json::array();
      for (std::size_t i = 0; i < n(); ++i) cv.push_back("0");
    }
    c["x"] = cx;
    c["xdot"] = cv;
    canon_["initial"] = c;
    sc_.setup.initial = {{t, x}, v};
  }

  const SpacetimePoint& initial_point() const { return sc_.setup.initial.base; }

  void load_metric() {
    const json& m = require(root_, "", "metric");
    check_keys(m, "metric", {"diagonal", "matrix"});
    if (m.size() != 1) fail("metric", "give exactly one of 'diagonal' or 'matrix'");
    const SymbolTable symbols = chart_->position_symbols();
    json c = json::object();
    const auto dim = static_cast<Eigen::Index>(n());
    if (m.contains("diagonal")) {
      json cd;
      auto entries = field_components(m["diagonal"], "metric.diagonal", symbols, cd);
      c["diagonal"] = cd;
      sys().metric = MassMetric([entries, dim](const SpacetimePoint& pt) {
        const auto vars = ChartSymbols::slots(pt);
        Matrix g = Matrix::Zero(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) g(i, i) = entries[static_cast<std::size_t>(i)].evaluate(vars);
        return g;
      });
    } else {
      const json& rows = as_array(m["matrix"], "metric.matrix", n());
      std::vector<std::vector<BoundExpression>> entries;
      json cm = json::array();
      for (std::size_t i = 0; i < n(); ++i) {
        json cr;
        entries.push_back(field_components(rows[i], index_path("metric.matrix", i), symbols, cr));
        cm.push_back(cr);
      }
      c["matrix"] = cm;
      sys().metric = MassMetric([entries, dim](const SpacetimePoint& pt) {
        const auto vars = ChartSymbols::slots(pt);
        Matrix g(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
          for (Eigen::Index j = 0; j < dim; ++j) {
            g(i, j) = entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].evaluate(vars);
          }
        }
        return g;
      });
    }
    canon_["metric"] = c;
    try {
      LocalMetric local(sys().metric, initial_point());
    } catch (const Error& e) {
      fail("metric", std::string(e.what()) + " at the initial point");
    }
  }

  void load_forces() {
    const SymbolTable symbols = chart_->phase_symbols();
    const json* f = optional(root_, "forces");
    json c = json::object();
    if (!f) {
      c["acceleration"] = json::array();
      for (std::size_t i = 0; i < n(); ++i) c["acceleration"].push_back("0");
      canon_["forces"] = c;
      sys().forces = ForceSection::zero(static_cast<Eigen::Index>(n()));
      return;
    }
    check_keys(*f, "forces", {"acceleration", "covector"});
    if (f->size() != 1) fail("forces", "give exactly one of 'acceleration' or 'covector'");
    const bool covector = f->contains("covector");
    const std::string key = covector ? "covector" : "acceleration";
    json cc;
    auto components = field_components((*f)[key], key_path("forces", key), symbols, cc);
    c[key] = cc;
    canon_["forces"] = c;
    const MassMetric metric = sys().metric;
    sys().forces = ForceSection([components, covector, metric](const SpacetimePoint& pt, const Vector& v) {
      const auto vars = ChartSymbols::slots(pt, v);
      Vector z(static_cast<Eigen::Index>(components.size()));
      for (std::size_t i = 0; i < components.size(); ++i) z[static_cast<Eigen::Index>(i)] = components[i].evaluate(vars);
      if (covector) z = LocalMetric(metric, pt).raise(z);
      return z;
    });
    try {
      sys().forces(sc_.setup.initial);
    } catch (const Error& e) {
      fail(key_path("forces", key), std::string(e.what()) + " at the initial state");
    }
  }

  void load_frames() {
    canon_["frames"] = json::object();
    const json* f = optional(root_, "frames");
    if (!f) return;
    if (!f->is_object()) fail("frames", "expected an object");
    const SymbolTable symbols = chart_->position_symbols();
    for (const auto& [name, value] : f->items()) {
      const std::string path = key_path("frames", name);
      if (!is_identifier(name)) fail(path, "not a valid identifier");
      json c;
      auto components = field_components(value, path, symbols, c);
      canon_["frames"][name] = c;
      FrameField field(VectorField::from_expressions(std::move(components)));
      try {
        require_finite(field.at(initial_point()), "frame");
      } catch (const Error& e) {
        fail(path, std::string(e.what()) + " at the initial point");
      }
      sys().frames.push_back({name, std::move(field)});
    }
  }

  void claim_name(const std::string& name, const std::string& path) {
    if (!is_identifier(name)) fail(path, "constraint names must be identifiers");
    if (name == "multiple") fail(path, "name 'multiple' is reserved");
    if (!constraint_names_.insert(name).second) fail(path, "duplicate constraint name '" + name + "'");
  }

  void load_constraints() {
    json c = {{"positional", json::array()}, {"kinetic", json::array()}};
    const json* cons = optional(root_, "constraints");
    if (cons) {
      check_keys(*cons, "constraints", {"positional", "kinetic"});
      if (const json* p = optional(*cons, "positional")) {
        as_array(*p, "constraints.positional");
        for (std::size_t i = 0; i < p->size(); ++i) c["positional"].push_back(load_positional((*p)[i], i));
      }
      if (const json* k = optional(*cons, "kinetic")) {
        as_array(*k, "constraints.kinetic");
        for (std::size_t i = 0; i < k->size(); ++i) c["kinetic"].push_back(load_kinetic((*k)[i], i));
      }
    }
    canon_["constraints"] = c;
  }

  json load_positional(const json& v, std::size_t index) {
    const std::string path = index_path("constraints.positional", index);
    check_keys(v, path, {"name", "rows", "anisotropy"});
    PositionalConstraint S;
    S.name = as_string(require(v, path, "name"), key_path(path, "name"));
    claim_name(S.name, key_path(path, "name"));
    json c = {{"name", S.name}, {"rows", json::array()}};
    const SymbolTable symbols = chart_->position_symbols();
    const std::string rows_path = key_path(path, "rows");
    const json& rows = as_array(require(v, path, "rows"), rows_path);
    if (rows.empty()) fail(rows_path, "at least one row is required");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string rp = index_path(rows_path, r);
      check_keys(rows[r], rp, {"f", "orientation", "unilateral", "exit_direction"});
      LevelSetRow row;
      const Expression f = as_expression(require(rows[r], rp, "f"), key_path(rp, "f"));
      row.f = ScalarField::from_expression(bind_checked(f, symbols, key_path(rp, "f")));
      row.unilateral = rows[r].contains("unilateral") ? as_bool(rows[r]["unilateral"], key_path(rp, "unilateral")) : true;
      json cr = {{"f", f.canonical()}, {"unilateral", row.unilateral}};
      if (rows[r].contains("orientation")) {
        const double o = as_number(rows[r]["orientation"], key_path(rp, "orientation"));
        if (o != 1.0 && o != -1.0) fail(key_path(rp, "orientation"), "orientation must be 1 or -1");
        row.orientation = static_cast<int>(o);
      } else if (row.unilateral) {
        row.orientation = 1;
      }
      if (row.orientation) cr["orientation"] = *row.orientation;
      if (rows[r].contains("exit_direction")) {
        json cd;
        row.exit_direction =
            VectorField::from_expressions(field_components(rows[r]["exit_direction"], key_path(rp, "exit_direction"),
                                                           symbols, cd));
        cr["exit_direction"] = cd;
      }
      try {
        (void)row.f(initial_point());
        (void)row.f.gradient(initial_point());
      } catch (const Error& e) {
        fail(key_path(rp, "f"), std::string(e.what()) + " at the initial point");
      }
      S.rows.push_back(std::move(row));
      c["rows"].push_back(cr);
    }
    if (v.contains("anisotropy")) {
      json ca;
      S.anisotropy = VectorField::from_expressions(field_components(v["anisotropy"], key_path(path, "anisotropy"),
                                                                    symbols, ca));
      c["anisotropy"] = ca;
    }
    sys().positional.push_back(std::move(S));
    return c;
  }

  json load_kinetic(const json& v, std::size_t index) {
    const std::string path = index_path("constraints.kinetic", index);
    check_keys(v, path, {"name", "rows", "kind", "owner", "frame"});
    KineticConstraint A;
    A.name = as_string(require(v, path, "name"), key_path(path, "name"));
    claim_name(A.name, key_path(path, "name"));
    const std::string kind = v.contains("kind") ? as_string(v["kind"], key_path(path, "kind")) : "permanent";
    if (kind == "permanent") {
      A.kind = KineticKind::permanent;
    } else if (kind == "instantaneous") {
      A.kind = KineticKind::instantaneous;
    } else {
      fail(key_path(path, "kind"), "expected 'permanent' or 'instantaneous'");
    }
    json c = {{"name", A.name}, {"kind", kind}, {"rows", json::array()}};
    if (v.contains("owner")) A.owner = as_string(v["owner"], key_path(path, "owner"));
    if (A.kind == KineticKind::instantaneous) {
      if (A.owner.empty()) fail(key_path(path, "owner"), "instantaneous constraints need an owning positional constraint");
      if (!sys().find_positional(A.owner)) fail(key_path(path, "owner"), "unknown positional constraint '" + A.owner + "'");
    } else if (!A.owner.empty()) {
      fail(key_path(path, "owner"), "only instantaneous constraints have an owner");
    }
    if (!A.owner.empty()) c["owner"] = A.owner;
    if (v.contains("frame")) {
      A.frame = as_string(v["frame"], key_path(path, "frame"));
      if (!sys().find_frame(A.frame)) fail(key_path(path, "frame"), "unknown frame '" + A.frame + "'");
      c["frame"] = A.frame;
    }
    const std::string rows_path = key_path(path, "rows");
    const json& rows = as_array(require(v, path, "rows"), rows_path);
    if (rows.empty()) fail(rows_path, "at least one row is required");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string rp = index_path(rows_path, r);
      check_keys(rows[r], rp, {"expr", "a", "b", "relation"});
      KineticRow row;
      json cr = json::object();
      const std::string rel = rows[r].contains("relation") ? as_string(rows[r]["relation"], key_path(rp, "relation")) : "=";
      if (rel == "=") {
        row.relation = Relation::equal;
      } else if (rel == ">=") {
        row.relation = Relation::greater_equal;
      } else {
        fail(key_path(rp, "relation"), "expected '=' or '>='");
      }
      cr["relation"] = rel;
      if (rows[r].contains("expr")) {
        if (rows[r].contains("a") || rows[r].contains("b")) fail(rp, "give either 'expr' or 'a' and 'b'");
        const Expression e = as_expression(rows[r]["expr"], key_path(rp, "expr"));
        cr["expr"] = e.canonical();
        row.row = affine_from_expression(bind_checked(e, chart_->phase_symbols(), key_path(rp, "expr")), key_path(rp, "expr"));
      } else {
        json ca;
        auto a = field_components(require(rows[r], rp, "a"), key_path(rp, "a"), chart_->position_symbols(), ca);
        Expression be = rows[r].contains("b") ? as_expression(rows[r]["b"], key_path(rp, "b")) : Expression::constant(0);
        auto b = bind_checked(be, chart_->position_symbols(), key_path(rp, "b"));
        cr["a"] = ca;
        cr["b"] = be.canonical();
        row.row = AffineRowField([a, b](const SpacetimePoint& pt) {
          const auto vars = ChartSymbols::slots(pt);
          RowValue out{Vector(static_cast<Eigen::Index>(a.size())), b.evaluate(vars)};
          for (std::size_t i = 0; i < a.size(); ++i) out.a[static_cast<Eigen::Index>(i)] = a[i].evaluate(vars);
          return out;
        });
      }
      try {
        require_finite(row.row(initial_point()).a, "kinetic row");
      } catch (const Error& e) {
        fail(rp, std::string(e.what()) + " at the initial point");
      }
      A.rows.push_back(std::move(row));
      c["rows"].push_back(cr);
    }
    sys().kinetic.push_back(std::move(A));
    return c;
  }

  AffineRowField affine_from_expression(const BoundExpression& e, const std::string& path) {
    const std::size_t dim = n();
    const ChartSymbols chart = *chart_;
    AffineRowField field([e, dim, chart](const SpacetimePoint& pt) {
      const auto vars = ChartSymbols::slots(pt, Vector::Zero(static_cast<Eigen::Index>(dim)));
      RowValue out{Vector(static_cast<Eigen::Index>(dim)), e.evaluate(vars)};
      for (std::size_t i = 0; i < dim; ++i) {
        out.a[static_cast<Eigen::Index>(i)] = e.derivative(vars, chart.velocity_slot(i)).second;
      }
      return out;
    });
    // Affinity in the velocities, probed at the initial point.
    try {
      const SpacetimePoint& pt = initial_point();
      const RowValue rv = field(pt);
      const auto dimi = static_cast<Eigen::Index>(dim);
      std::vector<Vector> probes;
      probes.push_back(sc_.setup.initial.p);
      for (Eigen::Index i = 0; i < dimi; ++i) {
        probes.push_back(Vector::Unit(dimi, i) * 1.5);
        for (Eigen::Index j = i + 1; j < dimi; ++j) probes.push_back(Vector::Unit(dimi, i) - 0.75 * Vector::Unit(dimi, j));
      }
      for (const auto& v : probes) {
        const double direct = e.evaluate(ChartSymbols::slots(pt, v));
        const double linear = rv.a.dot(v) + rv.b;
        if (std::abs(direct - linear) > 1e-9 * (1.0 + std::abs(direct))) fail(path, "row is not affine in the velocities");
      }
    } catch (const ExpressionError& err) {
      fail(path, std::string(err.what()) + " at the initial point");
    }
    return field;
  }

  LawParameter law_parameter(const json& obj, const std::string& path, const std::string& key,
                             std::optional<double> fallback, json& canon) {
    if (!obj.contains(key)) {
      if (!fallback) fail(key_path(path, key), "missing required key");
      canon[key] = Expression::constant(*fallback).canonical();
      return LawParameter(*fallback);
    }
    const Expression e = as_expression(obj[key], key_path(path, key));
    canon[key] = e.canonical();
    try {
      return LawParameter::expression(e, sc_.params);
    } catch (const ExpressionError& err) {
      fail(key_path(path, key), err.what());
    }
  }

  void check_constant_range(const LawParameter& p, const std::string& path, double lo, double hi, bool open_lo) {
    if (!p.is_constant()) return;
    const double v = p.constant_value();
    const bool ok = (open_lo ? v > lo : v >= lo) && v <= hi;
    if (!ok) fail(path, "value " + std::to_string(v) + " is out of range");
  }

  LawBinding load_law(const json& v, const std::string& path, const std::string& constraint, json& c) {
    if (!v.is_object()) fail(path, "expected an object");
    const std::string tag = as_string(require(v, path, "law"), key_path(path, "law"));
    auto spec = law_specs().find(tag);
    if (spec == law_specs().end()) {
      fail(key_path(path, "law"), "unknown law '" + tag + "' (known laws: " + registry_list() + ")");
    }
    std::set<std::string> allowed = spec->second.keys;
    allowed.insert({"law", "permanent", "rest_frame"});
    check_keys(v, path, allowed);
    c = {{"law", tag}};
    LawBinding b;
    if (v.contains("permanent")) {
      b.permanent = as_string(v["permanent"], key_path(path, "permanent"));
      const KineticConstraint* A = sys().find_kinetic(b.permanent);
      if (!A || A->kind != KineticKind::permanent) {
        fail(key_path(path, "permanent"), "'" + b.permanent + "' is not a permanent kinetic constraint");
      }
      c["permanent"] = b.permanent;
    }
    if (v.contains("rest_frame")) {
      b.rest_frame = as_string(v["rest_frame"], key_path(path, "rest_frame"));
      if (!sys().find_frame(b.rest_frame)) fail(key_path(path, "rest_frame"), "unknown frame '" + b.rest_frame + "'");
      c["rest_frame"] = b.rest_frame;
    }
    if (tag == "ideal_reflection") {
      IdealReflection law;
      const std::string target = v.contains("target") ? as_string(v["target"], key_path(path, "target")) : "automatic";
      if (target == "automatic") {
        law.target = ReflectionTarget::automatic;
      } else if (target == "positional") {
        law.target = ReflectionTarget::positional;
      } else if (target == "with_permanent") {
        law.target = ReflectionTarget::with_permanent;
      } else if (target == "with_instantaneous") {
        law.target = ReflectionTarget::with_instantaneous;
      } else {
        fail(key_path(path, "target"), "expected automatic, positional, with_permanent or with_instantaneous");
      }
      c["target"] = target;
      b.law = law;
    } else if (tag == "newton_restitution") {
      NewtonRestitution law;
      law.restitution = law_parameter(v, path, "restitution", 1.0, c);
      check_constant_range(law.restitution, key_path(path, "restitution"), 0.0, 1.0, false);
      b.law = law;
    } else if (tag == "totally_inelastic") {
      b.law = TotallyInelastic{};
    } else if (tag == "rest_frame_friction") {
      if (b.rest_frame.empty()) fail(key_path(path, "rest_frame"), "friction needs a rest frame");
      if (v.contains("alpha") && v.contains("restitution")) fail(path, "give either 'alpha' or 'restitution'");
      if (v.contains("beta") && v.contains("mu")) fail(path, "give either 'beta' or 'mu'");
      RestFrameFriction law;
      json scratch = json::object();
      if (v.contains("alpha")) {
        law.alpha = law_parameter(v, path, "alpha", std::nullopt, c);
      } else {
        const LawParameter e = law_parameter(v, path, "restitution", 1.0, scratch);
        check_constant_range(e, key_path(path, "restitution"), 0.0, 1.0, false);
        const std::string text = "-(1 + " + scratch["restitution"].get<std::string>() + ")";
        json alpha = {{"alpha", text}};
        law.alpha = law_parameter(alpha, path, "alpha", std::nullopt, c);
      }
      if (v.contains("beta")) {
        law.beta = law_parameter(v, path, "beta", std::nullopt, c);
      } else {
        law_parameter(v, path, "mu", 0.0, scratch);
        json beta = {{"beta", "-(" + scratch["mu"].get<std::string>() + ")"}};
        law.beta = law_parameter(beta, path, "beta", std::nullopt, c);
      }
      law.gain_along = v.contains("gain_along") ? as_number(v["gain_along"], key_path(path, "gain_along")) : 1.0;
      law.gain_across = v.contains("gain_across") ? as_number(v["gain_across"], key_path(path, "gain_across")) : 1.0;
      c["gain_along"] = law.gain_along;
      c["gain_across"] = law.gain_across;
      const PositionalConstraint* S = sys().find_positional(constraint);
      if (!S) fail(path, "friction applies to positional constraints only");
      const SpacetimePoint samples[] = {initial_point()};
      if (!is_rest_frame(*sys().find_frame(b.rest_frame), *S, samples)) {
        fail(key_path(path, "rest_frame"), "'" + b.rest_frame + "' is not a rest frame of '" + constraint + "'");
      }
      b.law = law;
    } else if (tag == "kinetic_ideal") {
      b.law = KineticIdeal{};
    } else if (tag == "breakable_saturating" || tag == "breakable_lowspeed") {
      const LawParameter threshold = law_parameter(v, path, "threshold", std::nullopt, c);
      check_constant_range(threshold, key_path(path, "threshold"), 0.0, INFINITY, true);
      if (tag == "breakable_saturating") {
        b.law = BreakableSaturating{threshold};
      } else {
        b.law = BreakableLowSpeed{threshold};
      }
    } else if (tag == "disk_wall_breakable") {
      DiskWallBreakable law;
      law.restitution_joint = law_parameter(v, path, "restitution_joint", 1.0, c);
      law.restitution_positional = law_parameter(v, path, "restitution_positional", 1.0, c);
      law.threshold = law_parameter(v, path, "threshold", std::nullopt, c);
      check_constant_range(law.restitution_joint, key_path(path, "restitution_joint"), 0.0, 1.0, false);
      check_constant_range(law.restitution_positional, key_path(path, "restitution_positional"), 0.0, 1.0, false);
      check_constant_range(law.threshold, key_path(path, "threshold"), 0.0, INFINITY, false);
      b.law = law;
    } else {
      b.law = InelasticClamp{};
    }
    return b;
  }

  void load_laws() {
    json c = json::object();
    const json* laws = optional(root_, "laws");
    if (laws) {
      if (!laws->is_object()) fail("laws", "expected an object");
      for (const auto& [name, value] : laws->items()) {
        const std::string path = key_path("laws", name);
        json cl;
        if (name == "multiple") {
          sys().multiple_law = load_law(value, path, name, cl);
        } else {
          const KineticConstraint* A = sys().find_kinetic(name);
          if (!sys().find_positional(name) && !A) fail(path, "no constraint named '" + name + "'");
          if (A && A->kind == KineticKind::instantaneous) {
            fail(path, "instantaneous constraints act through the law of their owner");
          }
          sys().laws[name] = load_law(value, path, name, cl);
        }
        c[name] = cl;
      }
    }
    for (const auto& S : sys().positional) {
      if (!sys().laws.count(S.name)) {
        sys().laws[S.name] = {IdealReflection{}, {}, {}};
        c[S.name] = {{"law", "ideal_reflection"}, {"target", "automatic"}};
      }
    }
    for (const auto& A : sys().kinetic) {
      if (A.kind == KineticKind::permanent && !sys().laws.count(A.name)) {
        sys().laws[A.name] = {InelasticClamp{}, {}, {}};
        c[A.name] = {{"law", "inelastic_clamp"}};
      }
    }
    canon_["laws"] = c;
  }

  void load_integrator() {
    const json& in = require(root_, "", "integrator");
    check_keys(in, "integrator",
               {"step", "end_time", "time_tolerance", "max_events", "drift_tolerance", "penetration_tolerance",
                "contact_tolerance", "classify_tolerance"});
    IntegratorConfig& cfg = sc_.setup.integrator;
    auto positive = [&](const char* key, double& out) {
      if (in.contains(key)) {
        out = as_number(in[key], key_path("integrator", key));
        if (!(out > 0.0)) fail(key_path("integrator", key), "must be positive");
      }
    };
    positive("step", cfg.step);
    positive("time_tolerance", cfg.time_tolerance);
    positive("drift_tolerance", cfg.drift_tolerance);
    positive("penetration_tolerance", cfg.penetration_tolerance);
    positive("contact_tolerance", cfg.contact_tolerance);
    positive("classify_tolerance", cfg.classify_tolerance);
    if (in.contains("max_events")) {
      const json& m = in["max_events"];
      if (!m.is_number_integer() || m.get<long long>() < 1) fail("integrator.max_events", "expected a positive integer");
      cfg.max_events = m.get<std::size_t>();
    }
    sc_.setup.end_time = as_number(require(in, "integrator", "end_time"), "integrator.end_time");
    if (sc_.setup.end_time < initial_point().t) fail("integrator.end_time", "ends before the initial time");
    canon_["integrator"] = {{"step", cfg.step},
                            {"end_time", sc_.setup.end_time},
                            {"time_tolerance", cfg.time_tolerance},
                            {"max_events", cfg.max_events},
                            {"drift_tolerance", cfg.drift_tolerance},
                            {"penetration_tolerance", cfg.penetration_tolerance},
                            {"contact_tolerance", cfg.contact_tolerance},
                            {"classify_tolerance", cfg.classify_tolerance}};
  }

  void load_outputs() {
    sc_.trajectory_file = sc_.name + "_trajectory.csv";
    sc_.events_file = sc_.name + "_events.jsonl";
    if (const json* out = optional(root_, "outputs")) {
      check_keys(*out, "outputs", {"trajectory", "events", "sample_interval"});
      if (out->contains("trajectory")) sc_.trajectory_file = as_string((*out)["trajectory"], "outputs.trajectory");
      if (out->contains("events")) sc_.events_file = as_string((*out)["events"], "outputs.events");
      if (out->contains("sample_interval")) {
        sc_.setup.sample_interval = as_number((*out)["sample_interval"], "outputs.sample_interval");
      }
    }
    canon_["outputs"] = {{"trajectory", sc_.trajectory_file},
                         {"events", sc_.events_file},
                         {"sample_interval", sc_.setup.sample_interval}};
  }

  void load_impulses() {
    canon_["impulses"] = json::array();
    const json* imp = optional(root_, "impulses");
    if (!imp) return;
    as_array(*imp, "impulses");
    for (std::size_t i = 0; i < imp->size(); ++i) {
      const std::string path = index_path("impulses", i);
      const json& v = (*imp)[i];
      check_keys(v, path, {"time", "value", "constraint"});
      ScriptedImpulse s;
      s.time = as_number(require(v, path, "time"), key_path(path, "time"));
      if (s.time < initial_point().t) fail(key_path(path, "time"), "impulse precedes the initial time");
      json cv;
      s.value = constant_vector(require(v, path, "value"), key_path(path, "value"), cv);
      json c = {{"time", s.time}, {"value", cv}};
      if (v.contains("constraint")) {
        s.constraint = as_string(v["constraint"], key_path(path, "constraint"));
        if (!sys().find_kinetic(s.constraint)) {
          fail(key_path(path, "constraint"), "no kinetic constraint named '" + s.constraint + "'");
        }
        c["constraint"] = s.constraint;
      }
      canon_["impulses"].push_back(c);
      sc_.setup.impulses.push_back(std::move(s));
    }
  }

  void load_samples() {
    sc_.samples.push_back(initial_point());
    canon_["samples"] = json::array();
    const json* s = optional(root_, "samples");
    if (!s) return;
    as_array(*s, "samples");
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::string path = index_path("samples", i);
      check_keys((*s)[i], path, {"t", "x"});
      const double t = (*s)[i].contains("t") ? as_number((*s)[i]["t"], key_path(path, "t")) : initial_point().t;
      json cx;
      const Vector x = constant_vector(require((*s)[i], path, "x"), key_path(path, "x"), cx);
      canon_["samples"].push_back({{"t", t}, {"x", cx}});
      sc_.samples.push_back({t, x});
    }
  }

  void validate_initial() {
    const SpacetimePoint& pt = initial_point();
    const IntegratorConfig& cfg = sc_.setup.integrator;
    for (std::size_t i = 0; i < sys().positional.size(); ++i) {
      const PositionalConstraint& S = sys().positional[i];
      const std::string path = index_path("constraints.positional", i);
      const Contact contact = on_constraint(pt, S, cfg.contact_tolerance);
      PositionalConstraint active{S.name, {}, {}};
      for (std::size_t r : contact.active.rows) active.rows.push_back(S.rows[r]);
      try {
        if (!active.rows.empty()) normal_basis(pt, active, sys().metric);
      } catch (const Error& e) {
        fail(path, std::string(e.what()) + " at the initial point");
      }
      for (std::size_t r = 0; r < S.rows.size(); ++r) {
        const auto& row = S.rows[r];
        if (row.unilateral && row.orientation && *row.orientation * contact.values[r] < -cfg.penetration_tolerance) {
          fail("initial.x", "initial point violates constraint '" + S.name + "'");
        }
      }
    }
    AffineRows rows = AffineRows::empty(static_cast<Eigen::Index>(n()));
    for (const auto& A : sys().kinetic) {
      if (A.kind == KineticKind::permanent) rows = stack(rows, kinetic_rows(A, pt));
    }
    if (rows.count()) {
      try {
        project_affine(LocalMetric(sys().metric, pt), rows, sc_.setup.initial.p);
      } catch (const Error& e) {
        fail("constraints.kinetic", std::string(e.what()) + " at the initial point");
      }
    }
    for (const auto& A : sys().kinetic) {
      if (A.kind != KineticKind::permanent) continue;
      const double scale = 1.0 + sc_.setup.initial.p.cwiseAbs().maxCoeff();
      if (!satisfies_kinetic(sc_.setup.initial, A, 1e-9 * scale).ok) {
        fail("initial.xdot", "initial velocity violates kinetic constraint '" + A.name + "'");
      }
    }
  }

  const json& root_;
  Scenario sc_;
  json canon_ = json::object();
  std::unique_ptr<ChartSymbols> chart_;
  std::set<std::string> constraint_names_;
};

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("<root>: malformed scenario document: ") + e.what());
  }
  return Loader(root).load();
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot read scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace imech
