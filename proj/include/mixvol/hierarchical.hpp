#pragma once

#include "mixvol/mc_engine.hpp"
#include "mixvol/recovery.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mixvol {

/// Laws of total variance v_k and of the increment v_k - v_(k-1), as masses
/// on the lattice i * h, i = 0..n-1.
struct VarianceMarginals {
    std::size_t k = 0; // layer, 1-based
    double h = 0.0;
    std::vector<double> total;
    std::vector<double> increment;
    InversionDiagnostics total_diagnostics;
    InversionDiagnostics increment_diagnostics;

    double mean_total() const;
    double mean_increment() const;
};

struct HierarchyOptions {
    std::size_t lattice = 128;
    std::size_t theta_cells = 512;
    std::size_t eta_points = 600;
    /// Largest lattice point; 0 sizes it from the last spot slice.
    double lattice_top = 0.0;
    /// Allowed excess of the CDF of v_k over that of v_(k-1).
    double dominance_tolerance = 0.01;
    InversionOptions inversion;
};

/// spot[k-1] is the slice of X(T_k); ratios[k-2] the slice of
/// X(T_k) / X(T_(k-1)) for k >= 2.
std::vector<VarianceMarginals> recover_variance_marginals(const std::vector<RiskNeutralSlice>& spot,
                                                          const std::vector<RiskNeutralSlice>& ratios,
                                                          double v0 = 0.0, const HierarchyOptions& options = {});

struct CouplingOptions {
    double tolerance = 1e-6;       // per-family L1
    std::size_t max_sweeps = 10000;
    std::size_t newton_steps = 200; // dual Newton steps before the scaling sweeps
    double infeasible = 1e-3;      // residual that rejects the marginals
    double mean_tolerance = 0.01;  // relative, on mean(next) = mean(prev) + mean(inc)
};

/// Joint masses of (prior total variance, next total variance) on the
/// lattice; row i, column j, zero below the diagonal.
struct VarianceCoupling {
    std::size_t n = 0;
    double h = 0.0;
    std::vector<double> mass;
    double residual_rows = 0.0;
    double residual_columns = 0.0;
    double residual_diagonals = 0.0;
    std::size_t sweeps = 0;
    bool converged = false;

    double at(std::size_t i, std::size_t j) const { return mass[i * n + j]; }
    std::vector<double> row_marginal() const;
    std::vector<double> column_marginal() const;
    std::vector<double> diagonal_marginal() const;
    double max_residual() const;
};

/// Maximum-entropy coupling by iterative proportional scaling over rows,
/// columns and diagonals of the upper triangle.
VarianceCoupling couple_marginals(const std::vector<double>& prev, const std::vector<double>& next,
                                  const std::vector<double>& inc, double h, const CouplingOptions& options = {});

struct HierarchicalModel {
    std::vector<double> maturities; // T_0 .. T_n
    double x0 = 1.0;
    RateCurve rates;
    double v0 = 0.0;
    double h = 0.0;
    std::size_t n = 0;
    std::vector<VarianceMarginals> marginals;  // layer k at k - 1
    std::vector<VarianceCoupling> couplings;   // layer 1 only fills the row of v0
    std::vector<RiskNeutralSlice> spot_targets;
    std::vector<RiskNeutralSlice> ratio_targets;

    void validate() const;
    std::size_t layers() const { return maturities.size() - 1; }
    ForwardCurve curve() const { return {maturities.front(), x0, rates}; }
    /// Nearest lattice index.
    std::size_t lattice_index(double v) const;
};

HierarchicalModel build_hierarchical(const std::vector<RiskNeutralSlice>& spot,
                                     const std::vector<RiskNeutralSlice>& ratios, const ForwardCurve& curve,
                                     double v0 = 0.0, const HierarchyOptions& options = {},
                                     const CouplingOptions& coupling = {});

struct ConditionalLaw {
    std::size_t row = 0;
    bool snapped = false;
    double requested = 0.0;
    std::vector<double> increments;
    std::vector<double> cdf;
};

/// Increment law of layer k given total variance sigma_prev at T_(k-1).
ConditionalLaw conditional_cdf(const HierarchicalModel& model, std::size_t k, double sigma_prev);

/// Layer k as a descriptor started at (T_(k-1), 1) whose atoms are the
/// conditional increments.
MgpDescriptor build_layer_parametrization(const HierarchicalModel& model, std::size_t k, double sigma_prev);

/// Joint law of (v_1..v_k) chained through the couplings, as lattice masses of v_k.
std::vector<double> chained_marginal(const HierarchicalModel& model, std::size_t k);

struct CirParams {
    double kappa = 0.0;
    double theta = 0.0;
    double xi = 0.0;
    double v0 = 0.0;

    void validate() const;
    double feller_ratio() const { return 2.0 * kappa * theta / (xi * xi); }
};

/// Closed-form mean of the integrated CIR variance.
double cir_integrated_mean(const CirParams& p, double t);

struct HestonOptions {
    std::size_t samples = 100000;
    double steps_per_year = 500.0;
    std::uint64_t seed = 1;
    int threads = 0;
};

struct HestonVarianceSample {
    std::vector<double> maturities;
    std::size_t samples = 0;
    std::vector<double> integrated; // samples x maturities
    double truncation_rate = 0.0;
    bool truncation_warning = false;

    double at(std::size_t s, std::size_t k) const { return integrated[s * maturities.size() + k]; }
};

/// Full-truncation Euler for the variance with trapezoidal accumulation of
/// its integral.
HestonVarianceSample heston_variance_law(const CirParams& p, const std::vector<double>& maturities,
                                         const HestonOptions& options = {});

/// Hierarchical model whose couplings are the binned joint sample.
HierarchicalModel empirical_model(const HestonVarianceSample& sample, double x0, const RateCurve& rates = {},
                                  std::size_t lattice = 128);

struct SliceCheck {
    std::string name;
    std::size_t k = 0;
    double statistic = 0.0;
    double p_value = 0.0;
    bool pass = true;
};

struct VerificationReport {
    std::vector<SliceCheck> checks;
    bool pass = true;
};

struct VerifyOptions {
    double ks_limit = 0.01;
    SimulationOptions simulation;
};

/// KS of simulated X(T_k) against the spot targets and of X(T_k)/X(T_(k-1))
/// against the ratio targets.
VerificationReport verify_model(const HierarchicalModel& model, std::size_t paths, std::uint64_t seed,
                                const VerifyOptions& options = {});

/// Uncorrelated Heston asset values at the sample's maturities: given the
/// integrated variance each log-increment is Gaussian. samples x maturities.
std::vector<double> heston_asset_values(const HestonVarianceSample& sample, double x0, const RateCurve& rates,
                                        std::uint64_t seed);

/// Two-sample KS of simulated X(T_k) and X(T_k)/X(T_(k-1)) against
/// uncorrelated Heston asset values built from an independent sample.
VerificationReport compare_to_heston(const HierarchicalModel& model, const HestonVarianceSample& oracle,
                                     std::size_t paths, std::uint64_t seed, const VerifyOptions& options = {});

/// Model on layers k..n started at (T_(k-1), x) with total variance v_prev.
HierarchicalModel conditional_restart(const HierarchicalModel& model, std::size_t k, double x, double v_prev,
                                      bool* snapped = nullptr);

/// Flat model with deterministic variance rate sigma^2 on each layer.
HierarchicalModel flat_model(double sigma, const std::vector<double>& maturities, double x0,
                             const RateCurve& rates = {}, std::size_t lattice = 128);

} // namespace mixvol
