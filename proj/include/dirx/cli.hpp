#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dirx {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // failed run cell, certified bound violation, failed check
  kExitUsage = 2,
  kExitInconclusive = 3,
};

/// Entry point of the `dirx` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dirx
