#pragma once

#include "mixvol/laplace.hpp"
#include "mixvol/market.hpp"
#include "mixvol/mgp.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace mixvol {

/// Fourier transform of the log-moneyness density, int e^{i xi y} E(y) dy,
/// by trapezoid quadrature. truncation receives the tail-mass estimate.
cplx char_function(const LogMoneynessDensity& density, cplx xi, double* truncation = nullptr);

/// Real-axis transform profile G(eta) = E[exp(-eta theta)] of the mixing
/// law. With tau = t the parameter is a variance rate; with tau = 1 it is
/// total variance.
struct TransformProfile {
    double maturity = 0.0;
    double tau = 1.0;
    std::vector<double> eta;
    std::vector<double> g;
    double imag_residue = 0.0;
    double truncation = 0.0;
};

/// Default eta grid: zero plus log-spaced points up to the grid's
/// quadrature limit.
std::vector<double> default_eta_grid(const LogMoneynessDensity& density, double tau, std::size_t points = 600);

TransformProfile build_G(const LogMoneynessDensity& density, const std::vector<double>& eta, double tau);
TransformProfile build_G(const LogMoneynessDensity& density, double tau);

/// Profile from a closed-form transform, for checks against known laws.
TransformProfile profile_from_function(const std::function<double(double)>& g, const std::vector<double>& eta,
                                       double tau = 1.0);

struct MonotoneReport {
    bool pass = true;
    int order = -1;
    double eta = 0.0;
    double value = 0.0;
};

MonotoneReport check_completely_monotone(const TransformProfile& profile, int max_order);

enum class InversionMethod { talbot, stehfest };

struct InversionOptions {
    InversionMethod method = InversionMethod::talbot;
    int talbot_nodes = 32;
    int stehfest_terms = 14;
    double fit_tolerance = 1e-13;
    std::size_t max_support = 100;
    int screen_order = 4;
    bool force = false;
    double failure_threshold = 0.25; // on the CDF repair
    /// recover_mixing: contour results whose transform residual exceeds this
    /// are replaced by the least-squares fit, as are contour failures.
    double refit_threshold = 1e-4;
    /// Residual the least-squares fit itself must reach.
    double refit_limit = 1e-3;
    /// recover_mixing: members of the AAA sequence tried, most accurate first.
    std::size_t continuation_candidates = 8;
};

struct InversionDiagnostics {
    double clipped_mass = 0.0;     // negative share of the raw density, fraction of its absolute mass
    double renormalization = 1.0;  // factor applied to the repaired CDF
    double cdf_repair = 0.0;       // sup |repaired CDF - raw CDF|
    std::size_t fit_degree = 0;
    double fit_error = 0.0;
    std::size_t right_poles = 0;
    int talbot_nodes = 0;
    std::string method;
    MonotoneReport screen;
    double transform_residual = 0.0;  // max |G(law) - G| over the eta grid, law taken as uniform cells
    bool refit = false;               // masses come from the positive least-squares fit
    std::string contour_failure;      // why the contour inversion was set aside, if it was
    std::size_t support_refinements = 0; // refits on a grid narrowed to the support
    std::size_t continuation_rank = 0;   // position of the accepted approximant in fit order
};

struct RecoveredMixing {
    std::vector<double> theta;
    std::vector<double> density;
    std::vector<double> cdf;
    InversionDiagnostics diagnostics;

    /// Cells between theta nodes carrying the CDF increments.
    MixingLaw to_mixing_law() const;
    double cdf_at(double theta) const;
};

/// Node grid [0, theta_max] sized from the spread of the density.
std::vector<double> default_theta_grid(const LogMoneynessDensity& density, double tau, std::size_t cells = 512);

RecoveredMixing invert_laplace(const TransformProfile& profile, const std::vector<double>& theta,
                               const InversionOptions& options = {});

/// Max |sum_j m_j avg_{cell j} e^{-eta theta} - G(eta)| over the profile's grid.
double transform_residual(const TransformProfile& profile, const std::vector<double>& theta,
                          const std::vector<double>& masses);

/// Nonnegative cell masses summing to one whose transform matches the
/// profile in least squares (active-set solve).
RecoveredMixing fit_transform_masses(const TransformProfile& profile, const std::vector<double>& theta);

/// Contour inversion, falling back to fit_transform_masses when the contour
/// fails or its law does not reproduce the transform.
RecoveredMixing recover_mixing(const TransformProfile& profile, const std::vector<double>& theta,
                               const InversionOptions& options = {});

struct CalibrationOptions {
    std::size_t quantiles = 256;
    std::size_t theta_cells = 512;
    std::size_t eta_points = 600;
    double calendar_limit = 0.05;
    /// Refits of least-squares laws on their support; 0 keeps the first grid.
    std::size_t refine_passes = 3;
    InversionOptions inversion;
};

struct CalibrationDiagnostics {
    std::vector<InversionDiagnostics> per_maturity;
    std::size_t calendar_violations = 0;
    double calendar_max_relative = 0.0;  // L1 repair over quantiles / L1 total variance, worst maturity
    double calendar_max_pointwise = 0.0; // largest single total-variance move
};

MgpDescriptor calibrate_mgd(const std::vector<RiskNeutralSlice>& slices, const ForwardCurve& curve,
                            const CalibrationOptions& options = {}, CalibrationDiagnostics* diagnostics = nullptr);

} // namespace mixvol
