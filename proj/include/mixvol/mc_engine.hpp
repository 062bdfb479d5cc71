#pragma once

#include "mixvol/mgp.hpp"
#include "mixvol/stats.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mixvol {

struct HierarchicalModel;

struct SimulationOptions {
    int threads = 0; // 0: OpenMP default
    bool parallel = true;
    bool antithetic = false;
};

/// Simulated asset values on a fixed grid plus the hidden variance draws.
struct PathBatch {
    std::vector<double> times;
    std::size_t paths = 0;
    std::vector<double> values; // paths x times.size()
    std::vector<double> hidden; // paths x hidden_dim
    std::size_t hidden_dim = 0;
    std::uint64_t seed = 0;
    int workers = 1;
    bool antithetic = false;
    ForwardCurve curve;

    double value(std::size_t path, std::size_t j) const { return values[path * times.size() + j]; }
    double hidden_at(std::size_t path, std::size_t d) const { return hidden[path * hidden_dim + d]; }
    std::vector<double> column(std::size_t j) const;
    /// Grid index of t; InputError when t is not on the grid.
    std::size_t index_of(double t) const;
};

/// Hidden draw: one uniform mapped through the mixing law, then exact
/// lognormal increments.
PathBatch simulate_mgd(const MgpDescriptor& desc, const std::vector<double>& grid, std::size_t paths,
                       std::uint64_t seed, const SimulationOptions& options = {});

/// Layer k uses hidden uniform k - 1 through the conditional increment law.
PathBatch simulate_hier(const HierarchicalModel& model, const std::vector<double>& grid, std::size_t paths,
                        std::uint64_t seed, const SimulationOptions& options = {});

struct PayoffSpec {
    enum class Kind { european, forward_start_ratio, custom };
    Kind kind = Kind::european;
    OptionKind option = OptionKind::call;
    double strike = 0.0;
    double start = 0.0;    // forward-start reset time
    double maturity = 0.0; // payment time
    /// custom: path values on the batch grid.
    std::function<double(const double* path, const std::vector<double>& times)> functional;

    static PayoffSpec european(OptionKind kind, double strike, double maturity);
    /// Pays (X_T2 / X_T1 - K)^+ (or the put) at T2 on unit notional.
    static PayoffSpec forward_start(OptionKind kind, double strike, double t1, double t2);
    static PayoffSpec custom(std::function<double(const double*, const std::vector<double>&)> f, double pay_time);
};

/// Discounted sample mean and its standard error. Antithetic batches are
/// averaged in pairs first.
MeanEstimate price_mc(const PathBatch& batch, const PayoffSpec& payoff);

/// Component weights reweighted by the likelihood of X(t1) = x1.
MixingLaw posterior_mixing(const MgpDescriptor& desc, double t1, double x1);

/// Descriptor started at (t1, x1) with the posterior law and the variance
/// still to accrue after t1.
MgpDescriptor restart_descriptor(const MgpDescriptor& desc, double t1, double x1);

/// Variance accrued over [a, b] from constant rates on [knots[k], knots[k+1]).
double accrued_variance(const std::vector<double>& knots, const std::vector<double>& rates, double a, double b);

} // namespace mixvol
