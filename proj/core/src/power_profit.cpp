#include "greendc/power_profit.hpp"

#include <cmath>
#include <stdexcept>

namespace greendc {

double total_power(double servers, double utilization, const DataCenterSpec& dc) {
    if (!(utilization >= 0.0 && utilization <= 1.0))
        throw std::invalid_argument("total_power: utilization must be in [0, 1]");
    if (servers < 0.0) throw std::invalid_argument("total_power: servers must be >= 0");
    return servers * dc.base_load_per_server() +
           servers * dc.prop_load_per_server() * utilization;
}

double workload_power(std::span<const QueueAllocation> per_class,
                      std::span<const double> loss_prob,
                      std::span<const ServiceClass> classes,
                      const DataCenterSpec& dc) {
    if (per_class.size() != classes.size() || loss_prob.size() != classes.size())
        throw std::invalid_argument("workload_power: per-class spans must match classes");
    double servers = 0.0;    // committed service rate in server units
    double admitted = 0.0;   // admitted traffic in server units
    for (std::size_t j = 0; j < classes.size(); ++j) {
        const auto& q = per_class[j];
        if (q.off()) continue;
        servers += q.service_rate / classes[j].per_server_capacity;
        admitted += (1.0 - loss_prob[j]) * q.alloc_rate / classes[j].per_server_capacity;
    }
    return dc.base_load_per_server() * servers + dc.prop_load_per_server() * admitted;
}

double class_revenue(double rate, double loss_prob, const ServiceClass& cls,
                     double slot_seconds) {
    if (rate < 0.0) throw std::invalid_argument("class_revenue: rate must be >= 0");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0))
        throw std::invalid_argument("class_revenue: loss_prob must be in [0, 1]");
    return (1.0 - loss_prob) * cls.income * rate * slot_seconds -
           loss_prob * cls.penalty * rate * slot_seconds;
}

namespace {

ProfitBreakdown::QueueDetail queue_detail(const QueueAllocation& q, const ServiceClass& cls,
                                          const WorkloadStats& stats,
                                          const DataCenterSpec& dc, double slot_seconds,
                                          double unit_cost, const SearchConfig& search) {
    ProfitBreakdown::QueueDetail d;
    if (q.off()) return d;
    if (q.alloc_rate > 0.0) {
        QueueSpec spec;
        spec.alloc_rate = q.alloc_rate;
        spec.service_rate = q.service_rate;
        spec.deadline = cls.deadline;
        spec.network_delay = dc.network_delay;
        d.loss_prob = loss_probability(stats, spec, search).loss_prob;
        d.revenue = class_revenue(q.alloc_rate, d.loss_prob, cls, slot_seconds);
    }
    const double servers = q.service_rate / cls.per_server_capacity;
    const double admitted = (1.0 - d.loss_prob) * q.alloc_rate / cls.per_server_capacity;
    d.power_kw = dc.base_load_per_server() * servers + dc.prop_load_per_server() * admitted;
    d.energy_cost = unit_cost * d.power_kw * slot_seconds * kKwhPerKwSecond;
    return d;
}

}  // namespace

ProfitBreakdown slot_profit(const Allocation& alloc, const SlotEnvironment& env,
                            std::span<const DataCenterSpec> dcs,
                            std::span<const ServiceClass> classes,
                            const SearchConfig& search) {
    const std::size_t nd = dcs.size();
    const std::size_t ncl = classes.size();
    env.validate(nd, ncl);
    if (alloc.n_dcs() != nd || alloc.n_classes() != ncl)
        throw std::invalid_argument("slot_profit: allocation shape mismatch");

    ProfitBreakdown out;
    out.green.assign(nd, std::vector<ProfitBreakdown::QueueDetail>(ncl));
    out.brown.assign(nd, std::vector<ProfitBreakdown::QueueDetail>(ncl));
    const double T = env.slot_length;
    for (std::size_t i = 0; i < nd; ++i) {
        for (std::size_t j = 0; j < ncl; ++j) {
            out.green[i][j] = queue_detail(alloc.green[i][j], classes[j], env.class_stats[j],
                                           dcs[i], T, dcs[i].green_unit_cost, search);
            out.brown[i][j] = queue_detail(alloc.brown[i][j], classes[j], env.class_stats[j],
                                           dcs[i], T, env.brown_price[i], search);
            out.green_revenue += out.green[i][j].revenue;
            out.green_cost += out.green[i][j].energy_cost;
            out.brown_revenue += out.brown[i][j].revenue;
            out.brown_cost += out.brown[i][j].energy_cost;
        }
    }
    return out;
}

ProfitabilityReport profitability_check(std::span<const ServiceClass> classes,
                                        std::span<const DataCenterSpec> dcs,
                                        const SlotEnvironment& env) {
    ProfitabilityReport rep;
    rep.ok.assign(dcs.size(), std::vector<bool>(classes.size(), true));
    for (std::size_t i = 0; i < dcs.size(); ++i) {
        const double worst_price = std::max(env.brown_price[i], dcs[i].green_unit_cost);
        for (std::size_t j = 0; j < classes.size(); ++j) {
            const double energy_per_request =
                dcs[i].prop_load_per_server() / classes[j].per_server_capacity * kKwhPerKwSecond;
            const bool ok = classes[j].income - energy_per_request * worst_price > 0.0;
            rep.ok[i][j] = ok;
            if (!ok) rep.failing.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return rep;
}

}  // namespace greendc
