#pragma once

#include <string>

namespace srmpc {

// Exit codes: 0 ok, 1 runtime failure, 2 config error.

/// Runs the configured closed loop(s); writes one trace CSV per controller
/// plus a summary JSON (totals, flags, seed, config hash, wall time).
int cmd_simulate(const std::string& config_path);

/// Runs the requested analyses (loss decomposition, second-order estimate,
/// Monte-Carlo comparison, gamma-scaling, alpha sweep) and writes a report
/// JSON. Requires at least one analysis in the config.
int cmd_analyze(const std::string& config_path);

/// Convenience wrapper: runs only the alpha-sweep analysis and prints the
/// (alpha, expected-loss) table.
int cmd_sweep_alpha(const std::string& config_path);

}  // namespace srmpc
