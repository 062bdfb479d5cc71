#pragma once

#include "mixvol/mc_engine.hpp"
#include "mixvol/mgp.hpp"
#include "mixvol/stats.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mixvol {

/// Local variance on an (x, t) grid; values stored t-major.
struct LocalVolSurface {
    std::vector<double> x;
    std::vector<double> t;
    std::vector<double> variance;
    std::vector<unsigned char> masked; // mixture density below the mask level
    std::size_t masked_cells = 0;

    double at(std::size_t it, std::size_t ix) const { return variance[it * x.size() + ix]; }
    /// Bilinear in (log x, t); outside is set when x leaves the grid (the
    /// edge value is used).
    double value(double x, double t, bool* outside = nullptr) const;
};

struct ProjectionOptions {
    double mask_density = 1e-12;
};

/// Conditional expectation of the component variance rate given X(t) = x.
/// At t0 the prior mean rate is used for every x.
LocalVolSurface project(const MgpDescriptor& desc, const std::vector<double>& x, const std::vector<double>& t,
                        const ProjectionOptions& options = {});

/// Log-spaced x grid covering +-span_sd standard deviations of the widest
/// component at the horizon.
std::vector<double> default_projection_x(const MgpDescriptor& desc, std::size_t points = 200, double span_sd = 6.0);

struct ProjectionCheck {
    double t = 0.0;
    KsResult ks;
};

struct ProjectionReport {
    std::vector<ProjectionCheck> checks;
    double escaped_fraction = 0.0;
    double max_statistic = 0.0;
};

struct VerifyProjectionOptions {
    double steps_per_year = 200.0;
    double escape_limit = 0.005;
    /// Times to test; empty uses every surface time after t0.
    std::vector<double> times;
    SimulationOptions simulation;
    /// Multiplies the surface variance (negative controls).
    double variance_scale = 1.0;
};

/// Log-space Euler simulation of the local-vol diffusion against exact
/// mixture sampling, two-sample KS at each test time.
ProjectionReport verify_projection(const MgpDescriptor& desc, const LocalVolSurface& surface, std::size_t paths,
                                   std::uint64_t seed, const VerifyProjectionOptions& options = {});

/// Rows t, columns x; local volatility unless as_variance.
std::string surface_csv(const LocalVolSurface& surface, bool as_variance = false);

} // namespace mixvol
