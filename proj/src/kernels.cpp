#include "mixvol/kernels.hpp"

#include "mixvol/rng.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mixvol {

namespace {

void lognormal_path(const LognormalKernel& k, std::size_t p, double* out) {
    const std::uint64_t source = k.antithetic ? (p & ~std::uint64_t{1}) : p;
    const double sign = (k.antithetic && (p & 1U)) ? -1.0 : 1.0;
    const PathRng rng(k.seed, source);
    const std::size_t row = k.row_of_path ? k.row_of_path[p] : p;
    const double* var = k.step_variance + row * k.steps;
    double* x = out + p * (k.steps + 1);
    double acc = 0.0;
    x[0] = k.x0 * std::exp(k.log_drift[0]);
    for (std::size_t j = 0; j < k.steps; ++j) {
        const double v = var[j];
        if (v > 0.0)
            acc += sign * std::sqrt(v) * rng.normal(Stream::brownian, static_cast<std::uint32_t>(j)) - 0.5 * v;
        x[j + 1] = k.x0 * std::exp(k.log_drift[j + 1] + acc);
    }
}

bool euler_path(const EulerKernel& k, std::size_t p, double* out) {
    const PathRng rng(k.seed, p);
    double log_x = std::log(k.x0);
    bool escaped = false;
    std::size_t next = 0;
    for (std::size_t i = 0; i < k.substeps; ++i) {
        const double t = k.times[i];
        const double dt = k.times[i + 1] - t;
        bool outside = false;
        const double v = k.local_variance(std::exp(log_x), t, &outside);
        escaped = escaped || outside;
        log_x += k.rate_integral[i] - 0.5 * v * dt +
                 std::sqrt(v * dt) * rng.normal(Stream::brownian, static_cast<std::uint32_t>(i));
        while (next < k.records && k.record_after[next] == i) out[p * k.records + next++] = std::exp(log_x);
    }
    return escaped;
}

} // namespace

void run_serial(const LognormalKernel& k, double* out) {
    for (std::size_t p = 0; p < k.paths; ++p) lognormal_path(k, p, out);
}

void run_parallel(const LognormalKernel& k, double* out, int threads) {
    const long long n = static_cast<long long>(k.paths);
#ifdef _OPENMP
    const int workers = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(workers)
#endif
    for (long long p = 0; p < n; ++p) lognormal_path(k, static_cast<std::size_t>(p), out);
    (void)threads;
}

EulerCounts run_serial(const EulerKernel& k, double* out) {
    EulerCounts c;
    for (std::size_t p = 0; p < k.paths; ++p) c.escaped_paths += euler_path(k, p, out) ? 1 : 0;
    return c;
}

EulerCounts run_parallel(const EulerKernel& k, double* out, int threads) {
    const long long n = static_cast<long long>(k.paths);
    std::size_t escaped = 0;
#ifdef _OPENMP
    const int workers = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(workers) reduction(+ : escaped)
#endif
    for (long long p = 0; p < n; ++p) escaped += euler_path(k, static_cast<std::size_t>(p), out) ? 1 : 0;
    (void)threads;
    return {escaped};
}

int available_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace mixvol
