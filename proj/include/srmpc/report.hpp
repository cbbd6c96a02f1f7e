#pragma once

#include "srmpc/model.hpp"
#include "srmpc/trace.hpp"
#include "srmpc/types.hpp"

#include <string>

namespace srmpc {

/// Locale-independent shortest round-trip formatting ("%.17g", C locale).
std::string format_double(double v);

/// Writes content to path atomically (temp file + rename). Creates parent
/// directories.
void write_text_atomic(const std::string& path, const std::string& content);

/// Per-step trace CSV: header row, then
/// k, z0.., y0.., u0.., eta0.., stage_cost, trace_Sigma, diverged.
std::string trace_csv(const Model& model, const ClosedLoopTrace& trace);

/// Long-format plot CSV: k, series, value (one row per state/control entry,
/// including the terminal state).
std::string plot_csv(const Model& model, const ClosedLoopTrace& trace);

}  // namespace srmpc
