#include "crn/metrics.hpp"

#include <benchmark/benchmark.h>

namespace
{
    crn::SweepSpec spec_for(std::int64_t n_cr)
    {
        crn::SweepSpec spec;
        spec.n_cr = {static_cast<std::uint32_t>(n_cr)};
        return spec;
    }

    void BM_SweepSerial(benchmark::State &state)
    {
        const auto spec = spec_for(state.range(0));
        for (auto _ : state)
            benchmark::DoNotOptimize(crn::run_sweep_runs_serial(spec));
        state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(spec.seeds.size() * 2));
    }

    void BM_SweepParallel(benchmark::State &state)
    {
        const auto spec = spec_for(state.range(0));
        for (auto _ : state)
            benchmark::DoNotOptimize(crn::run_sweep_runs(spec));
        state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(spec.seeds.size() * 2));
    }

    void BM_SingleRun(benchmark::State &state)
    {
        crn::SimConfig c = spec_for(state.range(0)).config_for(static_cast<std::uint32_t>(state.range(0)), 1);
        const auto p = state.range(1) == 0 ? crn::ProtocolKind::Crp : crn::ProtocolKind::Aodv;
        for (auto _ : state)
            benchmark::DoNotOptimize(crn::run_once(c, p));
    }
}

BENCHMARK(BM_SweepSerial)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SingleRun)->ArgsProduct({{20, 60, 100}, {0, 1}})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
