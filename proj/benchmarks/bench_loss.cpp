#include <benchmark/benchmark.h>

#include "greendc/queueing_loss.hpp"
#include "greendc/validation.hpp"

using namespace greendc;

namespace {

WorkloadStats iid(double mean, double sigma) {
    WorkloadStats st;
    st.mean_rate = mean;
    st.variance = sigma * sigma;
    st.autocov = {st.variance};
    return st;
}

void BM_LossProbability(benchmark::State& state) {
    const WorkloadStats st = iid(100, 30);
    QueueSpec q;
    q.alloc_rate = 100.0;
    q.service_rate = 100.0 + state.range(0);
    q.deadline = 5.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_probability(st, q));
    }
}
BENCHMARK(BM_LossProbability)->Arg(1)->Arg(10)->Arg(50);

void BM_DropRateEval(benchmark::State& state) {
    NormalizedClass nc;
    nc.cv = 0.3;
    nc.eff_deadline = 2.0;
    nc.norm_autocov = {0.09};
    const double mu = 100.0 + state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(drop_rate_eval(100.0, mu, nc));
    }
}
BENCHMARK(BM_DropRateEval)->Arg(5)->Arg(30);

void BM_MillsTail(benchmark::State& state) {
    const double t = state.range(0) / 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mills_tail(t));
    }
}
BENCHMARK(BM_MillsTail)->Arg(5)->Arg(50)->Arg(350);

void BM_RefAlpha(benchmark::State& state) {
    const double t = state.range(0) / 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(oracle::ref_alpha(t, 0.3));
    }
}
BENCHMARK(BM_RefAlpha)->Arg(5)->Arg(50);

}  // namespace
