#include "imech/output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace imech {

namespace {

using json = nlohmann::json;

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json optional_json(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string event_record(const ImpactEvent& event) {
  json frames = json::object();
  for (const auto& f : event.frames) {
    frames[f.frame] = {{"K_left", f.K_left},
                       {"K_right", f.K_right},
                       {"ratio", optional_json(f.ratio)},
                       {"rest_frame", f.rest_frame},
                       {"residual", optional_json(f.residual)}};
  }
  json rec = {{"type", "event"},
              {"index", event.index},
              {"time", event.point.t},
              {"point", vector_json(event.point.x)},
              {"p_left", vector_json(event.p_left)},
              {"I_act", vector_json(event.I_act)},
              {"I_react", vector_json(event.I_react)},
              {"p_right", vector_json(event.p_right)},
              {"law", event.law},
              {"constraints", event.constraints},
              {"broken", event.broken},
              {"frames", frames}};
  return rec.dump();
}

void write_event_log(std::ostream& out, const Scenario& scenario, const std::vector<ImpactEvent>& events) {
  json frames = json::array();
  for (const auto& f : scenario.system().frames) frames.push_back(f.name);
  const json header = {{"type", "header"},
                       {"scenario", scenario.name},
                       {"coordinates", scenario.coordinates},
                       {"frames", frames},
                       {"events", events.size()}};
  out << header.dump() << '\n';
  for (const auto& e : events) out << event_record(e) << '\n';
}

void write_trajectory_csv(std::ostream& out, const std::vector<std::string>& coordinates,
                          const std::vector<Sample>& samples) {
  out << 't';
  for (const auto& c : coordinates) out << ',' << c;
  for (const auto& c : coordinates) out << ',' << c << "dot";
  out << '\n';
  for (const auto& s : samples) {
    out << format_number(s.t);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) out << ',' << format_number(s.x[i]);
    for (Eigen::Index i = 0; i < s.v.size(); ++i) out << ',' << format_number(s.v[i]);
    out << '\n';
  }
}

void write_energy_table(std::ostream& out, const std::vector<FrameEnergy>& table) {
  out << "frame,K_left,K_right,ratio\n";
  for (const auto& e : table) {
    out << e.frame << ',' << format_number(e.left) << ',' << format_number(e.right) << ','
        << (e.ratio ? format_number(*e.ratio) : std::string("undefined")) << '\n';
  }
}

LogPaths write_logs(const RunResult& result, const Scenario& scenario, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error("cannot create output directory " + directory.string() + ": " + ec.message());
  LogPaths paths{directory / scenario.trajectory_file, directory / scenario.events_file};
  {
    std::ofstream out(paths.trajectory, std::ios::binary);
    if (!out) throw Error("cannot write " + paths.trajectory.string());
    write_trajectory_csv(out, scenario.coordinates, result.samples);
    if (!out) throw Error("failed writing " + paths.trajectory.string());
  }
  {
    std::ofstream out(paths.events, std::ios::binary);
    if (!out) throw Error("cannot write " + paths.events.string());
    write_event_log(out, scenario, result.events);
    if (!out) throw Error("failed writing " + paths.events.string());
  }
  return paths;
}

}  // namespace imech
