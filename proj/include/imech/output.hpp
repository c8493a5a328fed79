#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "imech/scenario.hpp"

namespace imech {

/// Shortest text that reads back to the same double.
std::string format_number(double value);

/// One JSON object per line: a header record, then one record per event.
void write_event_log(std::ostream& out, const Scenario& scenario, const std::vector<ImpactEvent>& events);
std::string event_record(const ImpactEvent& event);

/// CSV with header t,<coords>,<coords>dot.
void write_trajectory_csv(std::ostream& out, const std::vector<std::string>& coordinates,
                          const std::vector<Sample>& samples);

/// frame,K_left,K_right,ratio
void write_energy_table(std::ostream& out, const std::vector<FrameEnergy>& table);

struct LogPaths {
  std::filesystem::path trajectory;
  std::filesystem::path events;
};

/// Writes both logs into `directory` (created if needed). Throws Error on I/O
/// failure.
LogPaths write_logs(const RunResult& result, const Scenario& scenario, const std::filesystem::path& directory);

}  // namespace imech
