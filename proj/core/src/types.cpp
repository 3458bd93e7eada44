#include "greendc/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace greendc {

namespace {

void fail(const std::string& what) { throw std::invalid_argument(what); }

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void WorkloadStats::validate() const {
    if (!finite(mean_rate) || mean_rate <= 0.0) fail("WorkloadStats: mean_rate must be > 0");
    if (!finite(variance) || variance < 0.0) fail("WorkloadStats: variance must be >= 0");
    if (autocov.empty()) fail("WorkloadStats: autocov must contain at least lag 0");
    if (std::abs(autocov[0] - variance) > 1e-12 * (1.0 + variance))
        fail("WorkloadStats: autocov[0] must equal variance");
    for (double c : autocov) {
        if (!finite(c)) fail("WorkloadStats: autocov values must be finite");
        if (std::abs(c) > autocov[0] * (1.0 + 1e-12) + 1e-300)
            fail("WorkloadStats: |autocov[l]| must not exceed autocov[0]");
    }
}

void QueueSpec::validate() const {
    if (!finite(alloc_rate) || alloc_rate < 0.0) fail("QueueSpec: alloc_rate must be >= 0");
    if (!finite(service_rate) || service_rate < 1.0)
        fail("QueueSpec: service_rate must be >= 1");
    if (alloc_rate > service_rate) fail("QueueSpec: alloc_rate must not exceed service_rate");
    if (network_delay < 0.0) fail("QueueSpec: network_delay must be >= 0");
    if (deadline <= network_delay) fail("QueueSpec: deadline must exceed network_delay");
}

void ServiceClass::validate() const {
    if (deadline <= 0.0) fail("ServiceClass " + name + ": deadline must be > 0");
    if (income < 0.0) fail("ServiceClass " + name + ": income must be >= 0");
    if (penalty < 0.0) fail("ServiceClass " + name + ": penalty must be >= 0");
    if (per_server_capacity <= 0.0)
        fail("ServiceClass " + name + ": per_server_capacity must be > 0");
    if (drop_threshold < 0.0) fail("ServiceClass " + name + ": drop_threshold must be >= 0");
}

void DataCenterSpec::validate() const {
    if (idle_power < 0.0) fail("DataCenterSpec " + name + ": idle_power must be >= 0");
    if (peak_power < idle_power)
        fail("DataCenterSpec " + name + ": peak_power must be >= idle_power");
    if (pue < 1.0) fail("DataCenterSpec " + name + ": pue must be >= 1");
    if (max_servers < 1.0) fail("DataCenterSpec " + name + ": max_servers must be >= 1");
    if (network_delay < 0.0) fail("DataCenterSpec " + name + ": network_delay must be >= 0");
    if (green_unit_cost < 0.0)
        fail("DataCenterSpec " + name + ": green_unit_cost must be >= 0");
}

void SlotEnvironment::validate(std::size_t n_dcs, std::size_t n_classes) const {
    if (slot_length <= 0.0) fail("SlotEnvironment: slot_length must be > 0");
    if (green_energy.size() != n_dcs) fail("SlotEnvironment: green_energy size mismatch");
    if (brown_price.size() != n_dcs) fail("SlotEnvironment: brown_price size mismatch");
    if (class_stats.size() != n_classes) fail("SlotEnvironment: class_stats size mismatch");
    for (double w : green_energy)
        if (!finite(w) || w < 0.0) fail("SlotEnvironment: green_energy must be >= 0");
    for (double p : brown_price)
        if (!finite(p) || p < 0.0) fail("SlotEnvironment: brown_price must be >= 0");
    for (const auto& s : class_stats) {
        // Zero-demand classes are legal here; the optimizer reports them as the
        // degenerate-demand path.
        if (s.mean_rate > 0.0) s.validate();
        else if (s.mean_rate < 0.0) fail("SlotEnvironment: class demand must be >= 0");
    }
}

Allocation Allocation::zeros(std::size_t n_dcs, std::size_t n_classes) {
    Allocation a;
    a.green.assign(n_dcs, std::vector<QueueAllocation>(n_classes));
    a.brown.assign(n_dcs, std::vector<QueueAllocation>(n_classes));
    return a;
}

}  // namespace greendc
