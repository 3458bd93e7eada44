#pragma once

#include <span>
#include <string>
#include <vector>

#include "greendc/config.hpp"
#include "greendc/simulator.hpp"

namespace greendc {

/// Loads a delimiter-separated trace file. Header row:
///   timestamp,green_kw_<dc>...,price_<dc>...,rate_<class>...
/// Timestamps are seconds, strictly increasing. Rows coarser than the slot
/// length are step-expanded; finer rows are aggregated into per-slot workload
/// statistics. Throws ConfigError naming the row and column on bad input.
TraceSet load_traces(const std::string& path, const RunConfig& config);

/// Same, from text (exposed for tests).
TraceSet parse_traces(const std::string& text, const RunConfig& config,
                      const std::string& origin = "<memory>");

/// Serializes a TraceSet in the load_traces format: one row per slot.
std::string trace_csv(const TraceSet& traces, std::span<const DataCenterSpec> dcs,
                      std::span<const ServiceClass> classes);

}  // namespace greendc
