#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "greendc/simulator.hpp"
#include "greendc/types.hpp"
#include "greendc/validation.hpp"

namespace greendc {

/// User-input error (bad config or trace file). The CLI maps it to the usage
/// exit code; the message names the offending field or row.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    int version = 1;
    std::vector<DataCenterSpec> data_centers;
    std::vector<ServiceClass> classes;
    SolveOptions solver;
    SimOptions simulator;
    oracle::McConfig mc;
    oracle::GridSpec grid;

    int sim_lag_cap = 8;          // autocovariance lags estimated from trace files
    double slot_length = 900.0;   // slot length for trace files; the generator has its own

    std::string trace_file;       // one of trace_file / generator is set
    bool has_generator = false;
    SynthSpec generator;

    std::string output_dir;  // empty: fall back to $GREENDC_OUT, then "."
};

/// Loads and fully validates a config file. Defaults for optional sections are
/// the struct defaults above; all type invariants are enforced here.
RunConfig load_config(const std::string& path);

/// Parses config text (exposed for tests).
RunConfig parse_config(const std::string& text, const std::string& origin = "<memory>");

}  // namespace greendc
