#include <benchmark/benchmark.h>

#include <cmath>

#include "greendc/optimizer.hpp"
#include "greendc/simulator.hpp"

using namespace greendc;

namespace {

WorkloadStats iid(double mean, double sigma) {
    WorkloadStats st;
    st.mean_rate = mean;
    st.variance = sigma * sigma;
    st.autocov = {st.variance};
    return st;
}

DataCenterSpec dc_spec(const std::string& name, double green_cost, double delay) {
    DataCenterSpec d;
    d.name = name;
    d.idle_power = 0.1;
    d.peak_power = 0.2;
    d.pue = 1.2;
    d.max_servers = 3000;
    d.network_delay = delay;
    d.green_unit_cost = green_cost;
    return d;
}

ServiceClass cls_spec(const std::string& name, double k, double income, double deadline) {
    ServiceClass c;
    c.name = name;
    c.deadline = deadline;
    c.income = income;
    c.penalty = 2.0 * income;
    c.per_server_capacity = k;
    c.drop_threshold = 20.0;
    return c;
}

void BM_SolveSlot(benchmark::State& state) {
    const int n_dcs = static_cast<int>(state.range(0));
    std::vector<DataCenterSpec> dcs;
    SlotEnvironment env;
    env.slot_length = 900.0;
    for (int i = 0; i < n_dcs; ++i) {
        dcs.push_back(dc_spec("dc" + std::to_string(i + 1), 0.02 + 0.005 * i, 0.02 * (i + 1)));
        env.green_energy.push_back((30.0 - 5.0 * i) * 900.0 / 3600.0);
        env.brown_price.push_back(0.08 + 0.01 * i);
    }
    const std::vector<ServiceClass> classes = {cls_spec("web", 10.0, 4e-4, 1.5),
                                               cls_spec("video", 5.0, 8e-4, 4.0)};
    env.class_stats = {iid(1200, 300), iid(500, 150)};
    SolveOptions opts;
    for (auto _ : state) {
        const ProblemInstance P = build_problem(env, dcs, classes, opts);
        benchmark::DoNotOptimize(solve(P, opts));
    }
}
BENCHMARK(BM_SolveSlot)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_EstimateStats(benchmark::State& state) {
    std::vector<double> samples(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = 100.0 + 30.0 * std::sin(0.1 * static_cast<double>(i));
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_stats(samples, 8));
    }
}
BENCHMARK(BM_EstimateStats)->Arg(60)->Arg(900);

}  // namespace

BENCHMARK_MAIN();
