#pragma once

#include <string>
#include <vector>

namespace recon {

/// Runs one CLI invocation (argv without the program name).
/// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
int run_cli(const std::vector<std::string>& args);

} // namespace recon
