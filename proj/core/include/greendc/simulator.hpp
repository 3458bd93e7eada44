#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "greendc/optimizer.hpp"
#include "greendc/types.hpp"

namespace greendc {

/// Multi-slot input: per slot the green energy, grid price and workload
/// statistics, all aligned.
struct TraceSet {
    double slot_length = 900.0;  // s
    std::size_t n_dcs = 0;
    std::size_t n_classes = 0;

    struct Slot {
        std::vector<double> green_kwh;          // per DC
        std::vector<double> price;              // per DC, currency/kWh
        std::vector<WorkloadStats> class_stats; // per class
        // Raw per-class rate samples when available (generator output, fine
        // traces); lets the slot be re-serialized without losing the variance.
        std::vector<std::vector<double>> rate_samples;
    };
    std::vector<Slot> slots;

    SlotEnvironment environment(std::size_t slot) const;
    void validate() const;
};

/// Sample mean/variance and biased autocovariance of one slot's request-rate
/// series, up to lag min(lag_cap, n-1). Throws on an empty series; a
/// single-sample series yields zero variance.
WorkloadStats estimate_stats(std::span<const double> samples, int lag_cap);

/// M/M/1 deadline-violation tail (lam/mu) * exp(-(mu-lam)*tau), clamped to [0,1].
double mm1_loss(double lam, double mu, double tau);

struct SimOptions {
    SolveOptions solver;
    bool run_baselines = true;
    int profit_max_sweep = 64;  // grid points per queue in the Profit_Max sweep
};

struct SlotReport {
    int slot = 0;
    SolveResult solve;
    ProfitBreakdown profit;        // evaluated under the G/D/1 model
    double profit_base = 0.0;      // profit with mu = max(lambda, 1)
    double profit_max = 0.0;       // mu-sweep maximum (includes the solver point)
    std::optional<double> norm_gain;
    std::optional<double> mm1_profit;    // M/M/1 allocation scored under G/D/1
    std::optional<double> equal_profit;  // equal-split allocation under G/D/1
    double wall_ms = 0.0;          // diagnostic only; never serialized
};

struct RunSummary {
    double total_profit = 0.0;
    double total_mm1 = 0.0;
    double total_equal = 0.0;
    std::vector<SlotReport> slots;
};

RunSummary run(const TraceSet& traces, std::span<const DataCenterSpec> dcs,
               std::span<const ServiceClass> classes, const SimOptions& opts);

/// (profit - base) / (max - base); empty when max == base.
std::optional<double> normalized_profit_gain(double profit, double base, double max);

/// Same program with the M/M/1 tail behind the drop-rate interface. The
/// result is always non-certified (no concavity argument for this model).
SolveResult baseline_mm1(const SlotEnvironment& env, std::span<const DataCenterSpec> dcs,
                         std::span<const ServiceClass> classes, const SolveOptions& opts);

/// Freezes the workload split (equal across DCs, green first up to each DC's
/// cap, remainder brown) and optimizes only the service rates.
SolveResult baseline_equal_split(const SlotEnvironment& env,
                                 std::span<const DataCenterSpec> dcs,
                                 std::span<const ServiceClass> classes,
                                 const SolveOptions& opts);

/// Synthetic trace generator: diurnal workload, hourly wind and price shapes.
struct SynthSpec {
    int n_slots = 96;
    double slot_length = 900.0;     // s
    int samples_per_slot = 60;      // rate samples used to estimate slot stats

    struct Wind {
        double base_kw = 40.0;
        double amp_kw = 0.0;
        double peak_hour = 12.0;
        // Optional step profile overriding the sinusoid: low before the hour,
        // high at and after it.
        double step_hour = -1.0;
        double low_kw = 0.0;
        double high_kw = 0.0;
    };
    struct Price {
        double base = 0.08;         // currency/kWh
        double amp = 0.0;
        double peak_hour = 18.0;
        // Optional flat trough window.
        double trough_start_hour = -1.0;
        double trough_end_hour = -1.0;
        double trough_value = 0.0;
    };
    struct Workload {
        double base_rate = 1000.0;  // requests/s
        double amp = 0.0;
        double peak_hour = 14.0;
        double cv = 0.3;
        double ar1 = 0.0;           // lag-1 correlation of the rate samples
    };

    std::vector<Wind> wind;        // one per DC
    std::vector<Price> price;      // one per DC
    std::vector<Workload> classes; // one per class
    int lag_cap = 8;
};

TraceSet synth_traces(const SynthSpec& spec, std::uint64_t seed);

}  // namespace greendc
