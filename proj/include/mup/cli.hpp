#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mup {

/// Process exit statuses of the mup tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
  kExitNumerical = 5,
};

/// Runs `mup <subcommand> ...`; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mup
