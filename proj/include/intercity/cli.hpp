#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace intercity {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitInputError = 1, kExitNonConvergence = 2 };

/// Runs the command line front end. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace intercity
