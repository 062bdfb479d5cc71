// Serial reference kernels against their OpenMP versions.

#include "mixvol/kernels.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

namespace {

struct LognormalSetup {
    std::vector<double> drift, variance;
    std::vector<std::uint32_t> rows;
    mixvol::LognormalKernel k;

    LognormalSetup(std::size_t paths, std::size_t steps, std::size_t components) {
        drift.assign(steps + 1, 0.0);
        variance.resize(components * steps);
        for (std::size_t c = 0; c < components; ++c)
            for (std::size_t j = 0; j < steps; ++j) variance[c * steps + j] = (0.01 + 0.08 * c / components) / steps;
        rows.resize(paths);
        for (std::size_t p = 0; p < paths; ++p) rows[p] = static_cast<std::uint32_t>(p % components);
        k.seed = 7;
        k.paths = paths;
        k.steps = steps;
        k.x0 = 100.0;
        k.log_drift = drift.data();
        k.step_variance = variance.data();
        k.rows = components;
        k.row_of_path = rows.data();
    }
};

void lognormal(benchmark::State& state, bool parallel) {
    const auto paths = static_cast<std::size_t>(state.range(0));
    LognormalSetup s(paths, 50, 64);
    std::vector<double> out(paths * 51);
    for (auto _ : state) {
        if (parallel)
            mixvol::run_parallel(s.k, out.data(), 0);
        else
            mixvol::run_serial(s.k, out.data());
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long long>(paths * 50));
}

void euler(benchmark::State& state, bool parallel) {
    const auto paths = static_cast<std::size_t>(state.range(0));
    const std::size_t steps = 200;
    std::vector<double> times(steps + 1), rate(steps, 0.0);
    for (std::size_t i = 0; i <= steps; ++i) times[i] = static_cast<double>(i) / steps;
    const std::size_t record = steps - 1;
    mixvol::EulerKernel k;
    k.seed = 7;
    k.paths = paths;
    k.x0 = 100.0;
    k.times = times.data();
    k.substeps = steps;
    k.rate_integral = rate.data();
    k.local_variance = [](double x, double, bool* outside) {
        if (outside) *outside = false;
        const double m = std::log(x / 100.0);
        return 0.04 + 0.02 * m * m;
    };
    k.record_after = &record;
    k.records = 1;
    std::vector<double> out(paths);
    for (auto _ : state) {
        const auto c = parallel ? mixvol::run_parallel(k, out.data(), 0) : mixvol::run_serial(k, out.data());
        benchmark::DoNotOptimize(c);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long long>(paths * steps));
}

void BM_lognormal_serial(benchmark::State& s) { lognormal(s, false); }
void BM_lognormal_parallel(benchmark::State& s) { lognormal(s, true); }
void BM_euler_serial(benchmark::State& s) { euler(s, false); }
void BM_euler_parallel(benchmark::State& s) { euler(s, true); }

} // namespace

BENCHMARK(BM_lognormal_serial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lognormal_parallel)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_euler_serial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_euler_parallel)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
