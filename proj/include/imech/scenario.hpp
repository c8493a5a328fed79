#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "imech/engine.hpp"

namespace imech {

/// A validated scenario. Scenario files are JSON documents; see README.md for
/// the schema.
struct Scenario {
  std::string name;
  std::string description;
  std::vector<std::string> coordinates;
  std::map<std::string, double> params;
  SimulationSetup setup;
  /// Output file names, relative to the output directory.
  std::string trajectory_file;
  std::string events_file;
  /// Points used by rest-frame checks: the initial point plus any listed.
  std::vector<SpacetimePoint> samples;
  /// Normalized document: sorted keys, defaults filled in, canonical
  /// expression text. Loading it again yields the same canonical text.
  std::string canonical;

  const MechanicalSystem& system() const { return setup.system; }
};

/// Throws ValidationError with a path-like location (e.g.
/// "constraints.positional[0].rows[1].f") on any schema or consistency error.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace imech
