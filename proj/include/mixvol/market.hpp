#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace mixvol {

/// Piecewise-constant instantaneous rate: rates[i] applies on
/// [times[i], times[i+1]); the last rate extends to infinity.
class RateCurve {
public:
    RateCurve() : times_{0.0}, rates_{0.0} {}
    RateCurve(std::vector<double> times, std::vector<double> rates);

    static RateCurve flat(double rate) { return RateCurve({0.0}, {rate}); }

    /// Exact integral of r over [a, b].
    double integral(double a, double b) const;
    double rate(double t) const;
    double max_rate() const;

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& rates() const { return rates_; }

private:
    std::vector<double> times_;
    std::vector<double> rates_;
};

struct ForwardCurve {
    double t0 = 0.0;
    double x0 = 1.0;
    RateCurve rates;

    double forward(double t) const;
    double discount(double t) const;
};

/// Throws InputError for t < t0.
double forward(const ForwardCurve& curve, double t);

struct OptionChain {
    double maturity = 0.0;
    double forward = 0.0;
    double discount = 1.0;
    std::vector<double> strikes;
    std::vector<double> calls;
};

struct RiskNeutralSlice {
    double maturity = 0.0;
    double forward = 0.0;
    std::vector<double> x;
    std::vector<double> pdf;
    std::vector<double> cdf;

    double cdf_at(double value) const;
};

struct LogMoneynessDensity {
    double maturity = 0.0;
    std::vector<double> y;
    std::vector<double> pdf;
};

/// Integrals of pdf and x pdf, taken as trapezoids of x pdf and x^2 pdf over
/// log x (exact Jacobian; spectrally accurate on log-spaced grids).
double slice_mass(const RiskNeutralSlice& slice);
double slice_mean(const RiskNeutralSlice& slice);

/// Checks mass, CDF monotonicity and the martingale condition.
void validate_slice(const RiskNeutralSlice& slice);

/// Fills cdf by a normalized running trapezoid.
void rebuild_cdf(RiskNeutralSlice& slice);

LogMoneynessDensity to_log_moneyness(const RiskNeutralSlice& slice);
RiskNeutralSlice from_log_moneyness(const LogMoneynessDensity& density, double forward);

/// Log-spaced asset grid around the forward spanning +-span_sd standard
/// deviations of total variance total_var.
std::vector<double> log_spaced_grid(double forward, double total_var, std::size_t points = 512,
                                    double span_sd = 6.0);

struct ChainRepair {
    std::size_t index = 0;
    double strike = 0.0;
    double adjustment = 0.0; // cleaned minus quoted, undiscounted
};

struct ChainDiagnostics {
    std::vector<ChainRepair> repairs; // sorted by |adjustment|, largest first
    double max_adjustment = 0.0;
    std::vector<double> cleaned_calls;
};

struct ChainOptions {
    std::size_t points = 512;
    double span_sd = 6.0;
    double repair_report = 1e-8; // relative to forward
    double repair_limit = 0.01;  // relative to forward
};

/// Risk-neutral density from a call chain: convex cleaning, smile
/// interpolation in implied total variance, second strike difference.
RiskNeutralSlice chain_to_density(const OptionChain& chain, ChainDiagnostics* diagnostics = nullptr,
                                  const ChainOptions& options = {});

/// Call chain under a single Black volatility.
OptionChain black_chain(double forward, double maturity, double sigma, const std::vector<double>& strikes,
                        double discount = 1.0);

/// Least-squares projection onto call prices that are convex, with slope
/// in [-1, 0] and above intrinsic value. Undiscounted inputs.
std::vector<double> convex_clean(const std::vector<double>& strikes, const std::vector<double>& calls,
                                 double forward);

/// Monotone cubic Hermite interpolation with flat extrapolation.
class Pchip {
public:
    Pchip(std::vector<double> x, std::vector<double> y);
    double operator()(double at) const;

private:
    std::vector<double> x_, y_, slope_;
};

} // namespace mixvol
