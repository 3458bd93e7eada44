#include "greendc/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "greendc/power_profit.hpp"

namespace greendc {

SlotEnvironment TraceSet::environment(std::size_t slot) const {
    const Slot& s = slots.at(slot);
    SlotEnvironment env;
    env.slot_length = slot_length;
    env.green_energy = s.green_kwh;
    env.brown_price = s.price;
    env.class_stats = s.class_stats;
    return env;
}

void TraceSet::validate() const {
    if (slot_length <= 0.0) throw std::invalid_argument("TraceSet: slot_length must be > 0");
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const Slot& s = slots[k];
        if (s.green_kwh.size() != n_dcs || s.price.size() != n_dcs ||
            s.class_stats.size() != n_classes)
            throw std::invalid_argument("TraceSet: slot " + std::to_string(k) +
                                        " has mismatched sizes");
        environment(k).validate(n_dcs, n_classes);
    }
}

WorkloadStats estimate_stats(std::span<const double> samples, int lag_cap) {
    if (samples.empty()) throw std::invalid_argument("estimate_stats: empty series");
    const std::size_t n = samples.size();
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(n);

    WorkloadStats st;
    st.mean_rate = mean;
    const int top = std::min<long long>(std::max(lag_cap, 0), static_cast<long long>(n) - 1);
    st.autocov.assign(static_cast<std::size_t>(top) + 1, 0.0);
    for (int l = 0; l <= top; ++l) {
        double acc = 0.0;
        for (std::size_t i = 0; i + l < n; ++i)
            acc += (samples[i] - mean) * (samples[i + l] - mean);
        st.autocov[l] = acc / static_cast<double>(n);  // biased estimator
    }
    if (st.autocov[0] < 0.0) st.autocov[0] = 0.0;
    st.variance = st.autocov[0];
    return st;
}

double mm1_loss(double lam, double mu, double tau) {
    if (lam <= 0.0) return 0.0;
    const double p = lam / mu * std::exp(-(mu - lam) * tau);
    return std::min(1.0, std::max(0.0, p));
}

namespace {

class Mm1Model final : public DropRateModel {
public:
    DropRateEval eval(double lam, double mu, const NormalizedClass& nc) const override {
        DropRateEval e;
        if (lam <= 0.0) return e;
        const double tau = nc.eff_deadline;
        const double q = lam * lam / mu * std::exp(-(mu - lam) * tau);
        const double u = 2.0 / lam + tau;
        const double v = -(1.0 / mu + tau);
        e.value = q;
        e.dlam = q * u;
        e.dmu = q * v;
        e.d2_lam_lam = q * (u * u - 2.0 / (lam * lam));
        e.d2_lam_mu = q * u * v;
        e.d2_mu_mu = q * (v * v + 1.0 / (mu * mu));
        e.active_n = 1;
        return e;
    }
    double loss_prob(double lam, double mu, const NormalizedClass& nc) const override {
        return mm1_loss(lam, mu, nc.eff_deadline);
    }
    bool certified() const override { return false; }
};

// Coordinate-wise exhaustive mu sweep from the solver point, lambda fixed.
// The starting point is among the candidates, so the result is never below
// the solver's profit.
double mu_sweep_max(const ProblemInstance& P, const Allocation& alloc, int points) {
    std::vector<double> x = P.pack(alloc);
    const std::size_t nq = P.n_queues();

    auto queue_term = [&](std::size_t q, double lam, double mu) {
        const auto& Q = P.queues[q];
        const DropRateEval d = P.model->eval(lam, mu, Q.nc);
        return Q.income_coeff * lam - Q.mu_cost_coeff * mu - Q.drop_weight * d.value;
    };
    auto sla_ok = [&](std::size_t q, double lam, double mu) {
        const auto& Q = P.queues[q];
        if (!Q.sla_active) return true;
        return P.model->eval(lam, mu, Q.nc).value <= Q.drop_threshold;
    };

    for (std::size_t q = 0; q < nq; ++q) {
        const auto& Q = P.queues[q];
        const double lam = x[2 * q];
        double headroom = P.dcs[Q.dc].max_servers * Q.capacity;
        if (Q.green) {
            double others = 0.0;
            for (std::size_t p = 0; p < nq; ++p)
                if (p != q && P.queues[p].green && P.queues[p].dc == Q.dc)
                    others += x[2 * p + 1] / P.queues[p].capacity;
            headroom = std::min(headroom, (P.green_caps[Q.dc] - others) * Q.capacity);
        }
        if (P.total_cap) {
            double others = 0.0;
            for (std::size_t p = 0; p < nq; ++p)
                if (p != q && P.queues[p].dc == Q.dc) others += x[2 * p + 1] / P.queues[p].capacity;
            for (const auto& f : P.fixed_queues)
                if (f.dc == Q.dc) others += f.mu / P.classes[f.cls].per_server_capacity;
            headroom = std::min(headroom, (P.dcs[Q.dc].max_servers - others) * Q.capacity);
        }
        const double lo = std::max(1.0, lam);
        const double hi = std::min(headroom * (1.0 - 1e-12),
                                   std::max(3.0 * P.env.class_demand(Q.cls), 2.0 * lo));
        if (!(hi > lo)) continue;

        double best_mu = x[2 * q + 1];
        double best_term = queue_term(q, lam, best_mu);
        for (int p = 0; p < points; ++p) {
            const double mu = lo + (hi - lo) * p / std::max(points - 1, 1);
            if (mu < lam) continue;
            if (!sla_ok(q, lam, mu)) continue;
            const double term = queue_term(q, lam, mu);
            if (term > best_term) {
                best_term = term;
                best_mu = mu;
            }
        }
        x[2 * q + 1] = best_mu;
    }
    return P.profit(x);
}

Allocation with_base_rates(const Allocation& alloc) {
    Allocation base = alloc;
    for (auto* side : {&base.green, &base.brown}) {
        for (auto& dc : *side) {
            for (auto& q : dc) {
                if (q.off()) continue;
                q.service_rate = std::max(q.alloc_rate, 1.0);
            }
        }
    }
    return base;
}

}  // namespace

std::optional<double> normalized_profit_gain(double profit, double base, double max) {
    const double denom = max - base;
    if (denom == 0.0 || std::abs(denom) < 1e-300) return std::nullopt;
    return (profit - base) / denom;
}

SolveResult baseline_mm1(const SlotEnvironment& env, std::span<const DataCenterSpec> dcs,
                         std::span<const ServiceClass> classes, const SolveOptions& opts) {
    ProblemInstance P = build_problem(env, dcs, classes, opts);
    P.model = std::make_shared<Mm1Model>();
    return solve(P, opts);
}

SolveResult baseline_equal_split(const SlotEnvironment& env,
                                 std::span<const DataCenterSpec> dcs,
                                 std::span<const ServiceClass> classes,
                                 const SolveOptions& opts) {
    ProblemInstance P = build_problem(env, dcs, classes, opts);
    if (P.infeasible_by_construction) return solve(P, opts);

    const std::size_t nd = dcs.size();
    const std::size_t ncl = classes.size();
    std::vector<int> qof(nd * ncl * 2, -1);
    for (std::size_t q = 0; q < P.n_queues(); ++q) {
        const auto& Q = P.queues[q];
        qof[(Q.dc * ncl + Q.cls) * 2 + (Q.green ? 0 : 1)] = static_cast<int>(q);
    }

    // Green server budget per DC shared across classes by demand weight; the
    // workload of each class splits equally across DCs, green first.
    std::vector<std::vector<double>> green_cap(nd, std::vector<double>(ncl, 0.0));
    for (std::size_t i = 0; i < nd; ++i) {
        if (!P.green_active[i]) continue;
        double min_mass = 0.0, wsum = 0.0;
        std::vector<double> w(ncl, 0.0);
        for (std::size_t j = 0; j < ncl; ++j) {
            if (qof[(i * ncl + j) * 2] < 0) continue;
            min_mass += 1.0 / classes[j].per_server_capacity;
            w[j] = env.class_demand(j) / classes[j].per_server_capacity + 1e-9;
            wsum += w[j];
        }
        const double budget = 0.9 * (P.green_caps[i] - min_mass);
        for (std::size_t j = 0; j < ncl; ++j) {
            if (qof[(i * ncl + j) * 2] < 0) continue;
            const double mass = 1.0 / classes[j].per_server_capacity + budget * w[j] / wsum;
            green_cap[i][j] = 0.75 * mass * classes[j].per_server_capacity;
        }
    }

    for (std::size_t j = 0; j < ncl; ++j) {
        if (!P.class_active[j]) continue;
        const double share = env.class_demand(j) / static_cast<double>(nd);
        for (std::size_t i = 0; i < nd; ++i) {
            const int qg = qof[(i * ncl + j) * 2];
            const int qb = qof[(i * ncl + j) * 2 + 1];
            const double lg = qg >= 0 ? std::min(share, green_cap[i][j]) : 0.0;
            if (qg >= 0) P.queues[qg].fixed_lambda = lg;
            P.queues[qb].fixed_lambda = share - lg;
        }
    }
    return solve(P, opts);
}

RunSummary run(const TraceSet& traces, std::span<const DataCenterSpec> dcs,
               std::span<const ServiceClass> classes, const SimOptions& opts) {
    traces.validate();
    if (traces.n_dcs != dcs.size() || traces.n_classes != classes.size())
        throw std::invalid_argument("run: trace set does not match the DC/class lists");

    RunSummary summary;
    for (std::size_t k = 0; k < traces.slots.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const SlotEnvironment env = traces.environment(k);
        SlotReport rep;
        rep.slot = static_cast<int>(k);
        try {
            const ProblemInstance P = build_problem(env, dcs, classes, opts.solver);
            rep.solve = solve(P, opts.solver);
            if (rep.solve.status != SolveStatus::infeasible) {
                rep.profit =
                    slot_profit(rep.solve.allocation, env, dcs, classes, opts.solver.search);
                rep.profit_base =
                    slot_profit(with_base_rates(rep.solve.allocation), env, dcs, classes,
                                opts.solver.search)
                        .total();
                rep.profit_max = std::max(mu_sweep_max(P, rep.solve.allocation,
                                                       std::max(2, opts.profit_max_sweep)),
                                          rep.profit.total());
                rep.norm_gain =
                    normalized_profit_gain(rep.profit.total(), rep.profit_base, rep.profit_max);
                if (opts.run_baselines) {
                    const SolveResult mm1 = baseline_mm1(env, dcs, classes, opts.solver);
                    if (mm1.status != SolveStatus::infeasible)
                        rep.mm1_profit =
                            slot_profit(mm1.allocation, env, dcs, classes, opts.solver.search)
                                .total();
                    const SolveResult eq = baseline_equal_split(env, dcs, classes, opts.solver);
                    if (eq.status != SolveStatus::infeasible)
                        rep.equal_profit =
                            slot_profit(eq.allocation, env, dcs, classes, opts.solver.search)
                                .total();
                }
            }
        } catch (const std::exception& e) {
            // Per-slot failures are recorded; the run continues.
            rep.solve.status = SolveStatus::infeasible;
            rep.solve.message = e.what();
        }
        rep.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        summary.total_profit += rep.profit.total();
        if (rep.mm1_profit) summary.total_mm1 += *rep.mm1_profit;
        if (rep.equal_profit) summary.total_equal += *rep.equal_profit;
        summary.slots.push_back(std::move(rep));
    }
    return summary;
}

TraceSet synth_traces(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.wind.empty() || spec.wind.size() != spec.price.size())
        throw std::invalid_argument("synth_traces: wind/price lists must be non-empty and equal");
    if (spec.classes.empty()) throw std::invalid_argument("synth_traces: need at least one class");
    if (spec.n_slots < 1 || spec.samples_per_slot < 1 || spec.slot_length <= 0.0)
        throw std::invalid_argument("synth_traces: bad dimensions");

    const std::size_t nd = spec.wind.size();
    const std::size_t ncl = spec.classes.size();
    TraceSet ts;
    ts.slot_length = spec.slot_length;
    ts.n_dcs = nd;
    ts.n_classes = ncl;

    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto diurnal = [](double hour, double base, double amp, double peak) {
        return base + amp * std::sin(2.0 * 3.14159265358979323846 * (hour - peak + 6.0) / 24.0);
    };

    std::vector<double> ar_state(ncl, 0.0);
    for (int s = 0; s < spec.n_slots; ++s) {
        const double hour = (s + 0.5) * spec.slot_length / 3600.0;
        TraceSet::Slot slot;
        slot.green_kwh.resize(nd);
        slot.price.resize(nd);
        for (std::size_t i = 0; i < nd; ++i) {
            const auto& w = spec.wind[i];
            double kw;
            if (w.step_hour >= 0.0)
                kw = hour < w.step_hour ? w.low_kw : w.high_kw;
            else
                kw = diurnal(hour, w.base_kw, w.amp_kw, w.peak_hour);
            slot.green_kwh[i] = std::max(kw, 0.0) * spec.slot_length / 3600.0;

            const auto& p = spec.price[i];
            double price = diurnal(hour, p.base, p.amp, p.peak_hour);
            if (p.trough_start_hour >= 0.0 && hour >= p.trough_start_hour &&
                hour < p.trough_end_hour)
                price = p.trough_value;
            slot.price[i] = std::max(price, 0.0);
        }
        slot.rate_samples.resize(ncl);
        for (std::size_t j = 0; j < ncl; ++j) {
            const auto& c = spec.classes[j];
            const double m = std::max(diurnal(hour, c.base_rate, c.amp, c.peak_hour),
                                      0.05 * c.base_rate);
            auto& samples = slot.rate_samples[j];
            samples.resize(spec.samples_per_slot);
            const double ar = std::clamp(c.ar1, 0.0, 0.999);
            const double innov = std::sqrt(1.0 - ar * ar);
            for (int k = 0; k < spec.samples_per_slot; ++k) {
                ar_state[j] = ar * ar_state[j] + innov * normal(eng);
                samples[k] = std::max(m * (1.0 + c.cv * ar_state[j]), 0.0);
            }
            slot.class_stats.push_back(estimate_stats(samples, spec.lag_cap));
        }
        ts.slots.push_back(std::move(slot));
    }
    return ts;
}

}  // namespace greendc
