#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "greendc/queueing_loss.hpp"
#include "greendc/types.hpp"

namespace greendc {

/// Power drawn by `servers` switched-on servers at the given CPU utilization:
/// base load (idle + facility overhead) plus the utilization-proportional part.
/// Throws when utilization is outside [0, 1].
double total_power(double servers, double utilization, const DataCenterSpec& dc);

/// Power drawn by one side (green or brown) of one data center: base load
/// proportional to the committed service rates plus the proportional load of
/// the admitted traffic. loss_prob must have one entry per class.
double workload_power(std::span<const QueueAllocation> per_class,
                      std::span<const double> loss_prob,
                      std::span<const ServiceClass> classes,
                      const DataCenterSpec& dc);

/// Slot revenue of one queue: on-time income minus late penalties.
double class_revenue(double rate, double loss_prob, const ServiceClass& cls,
                     double slot_seconds);

/// Profit of one slot, broken down per data center, class and energy side.
struct ProfitBreakdown {
    struct QueueDetail {
        double revenue = 0.0;
        double power_kw = 0.0;
        double energy_cost = 0.0;
        double loss_prob = 0.0;
    };
    // Indexed [dc][class].
    std::vector<std::vector<QueueDetail>> green;
    std::vector<std::vector<QueueDetail>> brown;

    double green_revenue = 0.0;
    double green_cost = 0.0;
    double brown_revenue = 0.0;
    double brown_cost = 0.0;

    double total() const { return green_revenue - green_cost + brown_revenue - brown_cost; }
};

ProfitBreakdown slot_profit(const Allocation& alloc, const SlotEnvironment& env,
                            std::span<const DataCenterSpec> dcs,
                            std::span<const ServiceClass> classes,
                            const SearchConfig& search = {});

/// Sufficient profitability condition per (dc, class): income covers the
/// worst-case proportional energy cost of one request.
struct ProfitabilityReport {
    std::vector<std::vector<bool>> ok;          // [dc][class]
    std::vector<std::pair<int, int>> failing;   // (dc, class) pairs

    bool all_ok() const { return failing.empty(); }
};
ProfitabilityReport profitability_check(std::span<const ServiceClass> classes,
                                        std::span<const DataCenterSpec> dcs,
                                        const SlotEnvironment& env);

}  // namespace greendc
