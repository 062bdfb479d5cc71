#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace mixvol {

/// Exact lognormal stepping of many paths on a shared time grid. Each path
/// reads its per-step variances from one row of a table, so mixture models
/// share rows between paths and layered models give each path its own row.
struct LognormalKernel {
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::size_t steps = 0;
    double x0 = 1.0;
    /// log(F(t_j) / x0) for j = 0..steps.
    const double* log_drift = nullptr;
    /// rows x steps variance increments.
    const double* step_variance = nullptr;
    std::size_t rows = 0;
    /// Row used by each path; nullptr means row = path.
    const std::uint32_t* row_of_path = nullptr;
    /// Paths 2i and 2i+1 share Brownian draws with opposite signs.
    bool antithetic = false;
};

/// Writes paths x (steps + 1) values, row-major.
void run_serial(const LognormalKernel& k, double* out);
/// Same values as run_serial for any thread count; threads = 0 uses the
/// OpenMP default.
void run_parallel(const LognormalKernel& k, double* out, int threads);

/// Log-space Euler scheme for dX = r X dt + sqrt(v(X, t)) X dW on a fixed
/// substep grid.
struct EulerKernel {
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    double x0 = 1.0;
    /// Substep boundaries, t[0] = start.
    const double* times = nullptr;
    std::size_t substeps = 0;
    /// Integrated short rate over each substep.
    const double* rate_integral = nullptr;
    /// Local variance at (x, t); must be safe to call concurrently.
    std::function<double(double x, double t, bool* outside)> local_variance;
    /// Substep indices after which the state is recorded.
    const std::size_t* record_after = nullptr;
    std::size_t records = 0;
};

struct EulerCounts {
    std::size_t escaped_paths = 0;
};

/// Writes paths x records values, row-major.
EulerCounts run_serial(const EulerKernel& k, double* out);
EulerCounts run_parallel(const EulerKernel& k, double* out, int threads);

int available_threads();

} // namespace mixvol
