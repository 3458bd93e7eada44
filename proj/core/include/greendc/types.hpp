#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace greendc {

/// kWh obtained from one kW sustained for one second.
inline constexpr double kKwhPerKwSecond = 1.0 / 3600.0;

/// Per-class Gaussian arrival statistics over one time slot.
/// Rates are requests/second; autocovariance lags are spaced one second apart
/// and autocov[0] equals the variance.
struct WorkloadStats {
    double mean_rate = 0.0;          // requests/s
    double variance = 0.0;           // (requests/s)^2
    std::vector<double> autocov;     // lag 0..L, autocov[0] == variance

    double cv() const { return std::sqrt(variance) / mean_rate; }
    double cv2() const { return variance / (mean_rate * mean_rate); }

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

/// One queue as seen by the loss model: allocated arrival rate, deterministic
/// service rate, SLA deadline and the network delay to the hosting site.
struct QueueSpec {
    double alloc_rate = 0.0;         // requests/s
    double service_rate = 1.0;       // requests/s
    double deadline = 1.0;           // s
    double network_delay = 0.0;      // s

    double effective_deadline() const { return deadline - network_delay; }
    void validate() const;
};

/// SLA parameters of one service class.
struct ServiceClass {
    std::string name = "class";
    double deadline = 1.0;             // s
    double income = 0.0;               // currency per on-time request
    double penalty = 0.0;              // currency per late request
    double per_server_capacity = 1.0;  // requests/s one server can absorb
    double drop_threshold = 1.0;       // requests/s of tolerated drops

    void validate() const;
};

/// Per-site hardware and energy parameters.
struct DataCenterSpec {
    std::string name = "dc";
    double idle_power = 0.1;      // kW per server
    double peak_power = 0.2;      // kW per server
    double pue = 1.2;             // power usage effectiveness, >= 1
    double max_servers = 1e9;     // homogeneous server count
    double network_delay = 0.0;   // s from the distribution point
    double green_unit_cost = 0.0; // currency/kWh of local renewable supply

    /// Power one switched-on idle server draws, facility overhead included.
    double base_load_per_server() const { return idle_power + (pue - 1.0) * peak_power; }
    /// Extra power per server at full utilization.
    double prop_load_per_server() const { return peak_power - idle_power; }

    void validate() const;
};

/// Everything that changes slot to slot: available green energy, grid price
/// and the arrival statistics of each class.
struct SlotEnvironment {
    double slot_length = 900.0;            // s
    std::vector<double> green_energy;      // kWh per DC for this slot
    std::vector<double> brown_price;       // currency/kWh per DC
    std::vector<WorkloadStats> class_stats;  // one per class; mean_rate is the demand

    double class_demand(std::size_t j) const { return class_stats[j].mean_rate; }
    void validate(std::size_t n_dcs, std::size_t n_classes) const;
};

/// Decision variables of one queue. service_rate == 0 marks a queue that is
/// switched off entirely (no servers, no base load).
struct QueueAllocation {
    double alloc_rate = 0.0;
    double service_rate = 0.0;

    bool off() const { return service_rate <= 0.0; }
};

/// Decision variables for every (data center, class) pair in one slot.
struct Allocation {
    // Indexed [dc][class].
    std::vector<std::vector<QueueAllocation>> green;
    std::vector<std::vector<QueueAllocation>> brown;

    static Allocation zeros(std::size_t n_dcs, std::size_t n_classes);
    std::size_t n_dcs() const { return green.size(); }
    std::size_t n_classes() const { return green.empty() ? 0 : green[0].size(); }
};

}  // namespace greendc
