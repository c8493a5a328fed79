#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace imech {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_validation = 2, exit_runtime = 3 };

/// Entry point of the `imech` command line tool. `args` excludes the program
/// name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace imech
