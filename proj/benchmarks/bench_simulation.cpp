#include <benchmark/benchmark.h>

#include "securetime/netsim.hpp"

using namespace securetime;

namespace {

Scenario bench_scenario(SyncMode mode, AdversaryKind adversary) {
    Scenario s;
    s.net = NetParams{0, 1'000'000, 100'000};
    s.scheme = &crypto::test_scheme();
    s.receivers = {ReceiverSpec{0, 3'000'000, false}};
    s.mode = mode;
    s.sync_interval_ns = 100'000'000;
    s.horizon_ns = 60'000'000'000;
    s.seed = 2024;
    s.adversary = adversary;
    return s;
}

void BM_HonestOneStep(benchmark::State& state) {
    for (auto _ : state) {
        Simulation sim(bench_scenario(SyncMode::kOneStep, AdversaryKind::kPassthrough));
        benchmark::DoNotOptimize(sim.run().size());
    }
}

void BM_HonestTwoStep(benchmark::State& state) {
    for (auto _ : state) {
        Simulation sim(bench_scenario(SyncMode::kTwoStep, AdversaryKind::kPassthrough));
        benchmark::DoNotOptimize(sim.run().size());
    }
}

void BM_BitflipRun(benchmark::State& state) {
    for (auto _ : state) {
        Simulation sim(bench_scenario(SyncMode::kOneStep, AdversaryKind::kBitflip));
        benchmark::DoNotOptimize(sim.run().size());
    }
}

}  // namespace

BENCHMARK(BM_HonestOneStep)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HonestTwoStep)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BitflipRun)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
