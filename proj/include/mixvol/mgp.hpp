#pragma once

#include "mixvol/black_scholes.hpp"
#include "mixvol/market.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mixvol {

/// Probability law on the parameter set, either finitely many atoms or a
/// piecewise-constant density on cells.
class MixingLaw {
public:
    enum class Kind { atoms, grid };

    MixingLaw() = default;
    static MixingLaw atoms(std::vector<double> points, std::vector<double> weights);
    /// density is per cell; edges has one more entry than density.
    static MixingLaw grid(std::vector<double> edges, std::vector<double> density);
    static MixingLaw grid_from_masses(std::vector<double> edges, std::vector<double> masses);
    static MixingLaw uniform(std::size_t cells, double lo = 0.0, double hi = 1.0);

    Kind kind() const { return kind_; }
    std::size_t size() const { return weights_.size(); }
    /// Atom location, or cell midpoint for grid laws.
    double point(std::size_t i) const;
    double weight(std::size_t i) const { return weights_[i]; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& points() const { return points_; } // atoms only
    const std::vector<double>& edges() const { return edges_; }   // grid only
    std::vector<double> density() const;                          // grid only

    double cdf(double theta) const;
    /// Generalized inverse for atoms; linear within cells for grids, with
    /// flat stretches resolved to their midpoint.
    double quantile(double u) const;
    /// Component carrying quantile level u in (0, 1].
    std::size_t component_at(double u) const;
    /// Middle quantile level of a component's probability band.
    double component_level(std::size_t i) const;
    double support_lo() const;
    double support_hi() const;

    MixingLaw with_weights(std::vector<double> weights) const;

private:
    Kind kind_ = Kind::atoms;
    std::vector<double> points_;
    std::vector<double> edges_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
};

/// Mixing law plus per-component variance increments on a maturity grid.
/// Between maturities each component's variance accrues at a constant rate.
struct MgpDescriptor {
    MixingLaw mixing;
    std::vector<double> maturities;
    std::vector<std::vector<double>> increments; // [component][maturity]
    double t0 = 0.0;
    double x0 = 1.0;
    RateCurve rates;
    double theta_lo = 0.0;
    double theta_hi = std::numeric_limits<double>::infinity();

    void validate() const;
    double horizon() const { return maturities.back(); }
    ForwardCurve curve() const { return {t0, x0, rates}; }
    double forward(double t) const { return curve().forward(t); }
    double discount(double t) const { return curve().discount(t); }
    /// Cumulative variance from t0 to t.
    double total_variance(std::size_t component, double t) const;
    /// Variance rate on the maturity interval containing t (right-continuous).
    double variance_rate(std::size_t component, double t) const;
    /// Cumulative variances at every grid maturity.
    std::vector<double> cumulative(std::size_t component) const;
};

/// Single-maturity descriptor whose components are total variances.
MgpDescriptor variance_mixture_descriptor(const MixingLaw& total_variance_law, double maturity, double x0 = 100.0,
                                          const RateCurve& rates = {});

struct EuropeanSpec {
    OptionKind kind = OptionKind::call;
    double strike = 0.0;
    double maturity = 0.0;
};

struct ComponentDensity {
    double value = 0.0;
    bool degenerate = false; // zero variance: point mass at the forward
};

ComponentDensity component_density(const MgpDescriptor& desc, std::size_t component, double x, double t);
double mixture_density(const MgpDescriptor& desc, double x, double t);
double mixture_cdf(const MgpDescriptor& desc, double x, double t);

/// Density slice on a log-spaced grid covering all but a negligible tail of
/// the components.
RiskNeutralSlice mixture_slice(const MgpDescriptor& desc, double t, std::size_t points = 512, double span_sd = 6.0);

double price_european(const MgpDescriptor& desc, const EuropeanSpec& spec);
/// Black volatility per year reproducing price_european.
double implied_vol(const MgpDescriptor& desc, const EuropeanSpec& spec);

struct Greeks {
    double delta = 0.0;
    double gamma = 0.0;
    /// Weighted sensitivity to each component's average volatility.
    std::vector<double> vega;
};

Greeks greeks(const MgpDescriptor& desc, const EuropeanSpec& spec);

MgpDescriptor reparametrize_equivalent(const MgpDescriptor& desc, const MixingLaw& target);

struct EquivalenceReport {
    bool equivalent = true;
    double max_deviation = 0.0;
    double at_quantile = 0.0;
    double at_maturity = 0.0;
};

EquivalenceReport check_equivalence(const MgpDescriptor& a, const MgpDescriptor& b, std::size_t quantiles = 256,
                                    double tolerance = 1e-8);

struct StrongSolutionReport {
    bool finite = true;
    double value = 0.0;
    double c0 = 0.0;
    double tail_rate = std::numeric_limits<double>::quiet_NaN();
    std::string detail;
};

/// growth holds f per component; empty derives max(sup r, sup sqrt(nu)).
StrongSolutionReport check_strong_solution(const MgpDescriptor& desc, double tau0,
                                           const std::vector<double>& growth = {});

} // namespace mixvol
