#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vidprop {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitUsage = 2,  // bad flags, missing or invalid config
  kExitData = 3,
  kExitNumeric = 4,
  kExitIo = 5,
};

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "VIDPROP_CONFIG";

/// Runs one subcommand. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vidprop
