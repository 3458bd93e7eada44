#pragma once

#include <string>
#include <vector>

namespace greendc {

/// Command dispatch for the greendc tool. Subcommands: solve, simulate,
/// validate-loss, audit-convexity, brute-force, gen-traces.
/// Exit codes: 0 ok, 1 runtime failure, 2 usage error, 3 validation/audit
/// failure.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace greendc
