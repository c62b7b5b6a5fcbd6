#pragma once

#include <string>
#include <vector>

namespace simix::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // I/O and other unexpected failures
  kExitBadInput = 2,
  kExitEstimation = 3,
  kExitNotConverged = 4,
};

/// Runs one command line (without the program name) and returns the exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace simix::cli
