#pragma once

namespace reinsqp {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 1,
  kExitInfeasible = 2,
  kExitNumerical = 3,
};

/// Entry point of the `reinsqp` executable.
int run_cli(int argc, char** argv);

}  // namespace reinsqp
