#include "mixvol/mgp.hpp"

#include "mixvol/errors.hpp"
#include "mixvol/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mixvol {

namespace {

std::vector<double> prefix_sums(const std::vector<double>& w) {
    std::vector<double> c(w.size());
    std::partial_sum(w.begin(), w.end(), c.begin());
    c.back() = 1.0;
    return c;
}

std::string interval_text(double a, double b) {
    std::ostringstream os;
    os << "[" << a << ", " << b << "]";
    return os.str();
}

// Zero-mass cells strictly inside the support make the CDF non-invertible.
void require_invertible(const MixingLaw& law, const char* who) {
    if (law.kind() != MixingLaw::Kind::grid) return;
    const auto& w = law.weights();
    std::size_t first = 0, last = w.size() - 1;
    while (first < w.size() && w[first] <= 0.0) ++first;
    while (last > first && w[last] <= 0.0) --last;
    for (std::size_t i = first; i <= last; ++i) {
        if (w[i] > 0.0) continue;
        std::size_t j = i;
        while (j <= last && w[j] <= 0.0) ++j;
        throw InputError(std::string(who) + ": mixing CDF is flat on " +
                         interval_text(law.edges()[i], law.edges()[j]));
    }
}

} // namespace

MixingLaw MixingLaw::atoms(std::vector<double> points, std::vector<double> weights) {
    require(!points.empty() && points.size() == weights.size(), "MixingLaw: need matching atoms and weights");
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(std::isfinite(points[i]), "MixingLaw: atom locations must be finite");
        require(i == 0 || points[i] > points[i - 1], "MixingLaw: atom locations must be strictly ascending");
        require(weights[i] >= 0.0 && std::isfinite(weights[i]), "MixingLaw: weights must be nonnegative");
        total += weights[i];
    }
    require(std::abs(total - 1.0) <= 1e-10, "MixingLaw: atom weights sum to " + std::to_string(total));
    // Already-normalized weights are kept bit-exact so stored laws reload unchanged.
    if (std::abs(total - 1.0) > 1e-12)
        for (double& w : weights) w /= total;
    MixingLaw law;
    law.kind_ = Kind::atoms;
    law.points_ = std::move(points);
    law.weights_ = std::move(weights);
    law.cumulative_ = prefix_sums(law.weights_);
    return law;
}

MixingLaw MixingLaw::grid(std::vector<double> edges, std::vector<double> density) {
    require(edges.size() >= 2 && edges.size() == density.size() + 1, "MixingLaw: grid needs n+1 edges for n cells");
    std::vector<double> masses(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) {
        require(density[i] >= 0.0 && std::isfinite(density[i]), "MixingLaw: density must be nonnegative");
        masses[i] = density[i] * (edges[i + 1] - edges[i]);
    }
    const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
    require(std::abs(total - 1.0) <= 1e-6, "MixingLaw: grid density integrates to " + std::to_string(total));
    return grid_from_masses(std::move(edges), std::move(masses));
}

MixingLaw MixingLaw::grid_from_masses(std::vector<double> edges, std::vector<double> masses) {
    require(edges.size() >= 2 && edges.size() == masses.size() + 1, "MixingLaw: grid needs n+1 edges for n cells");
    for (std::size_t i = 1; i < edges.size(); ++i)
        require(edges[i] > edges[i - 1], "MixingLaw: grid edges must be strictly ascending");
    double total = 0.0;
    for (double m : masses) {
        require(m >= 0.0 && std::isfinite(m), "MixingLaw: cell masses must be nonnegative");
        total += m;
    }
    require(total > 0.0, "MixingLaw: grid carries no mass");
    if (std::abs(total - 1.0) > 1e-12)
        for (double& m : masses) m /= total;
    MixingLaw law;
    law.kind_ = Kind::grid;
    law.edges_ = std::move(edges);
    law.weights_ = std::move(masses);
    law.cumulative_ = prefix_sums(law.weights_);
    return law;
}

MixingLaw MixingLaw::uniform(std::size_t cells, double lo, double hi) {
    require(cells >= 1 && hi > lo, "MixingLaw::uniform: need cells >= 1 and hi > lo");
    std::vector<double> edges(cells + 1), masses(cells, 1.0 / cells);
    for (std::size_t i = 0; i <= cells; ++i) edges[i] = lo + (hi - lo) * i / cells;
    edges.back() = hi;
    return grid_from_masses(std::move(edges), std::move(masses));
}

double MixingLaw::point(std::size_t i) const {
    return kind_ == Kind::atoms ? points_[i] : 0.5 * (edges_[i] + edges_[i + 1]);
}

std::vector<double> MixingLaw::density() const {
    std::vector<double> d(weights_.size(), 0.0);
    if (kind_ != Kind::grid) return d;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = weights_[i] / (edges_[i + 1] - edges_[i]);
    return d;
}

double MixingLaw::cdf(double theta) const {
    if (kind_ == Kind::atoms) {
        const auto it = std::upper_bound(points_.begin(), points_.end(), theta);
        const std::size_t n = static_cast<std::size_t>(it - points_.begin());
        return n == 0 ? 0.0 : cumulative_[n - 1];
    }
    if (theta <= edges_.front()) return 0.0;
    if (theta >= edges_.back()) return 1.0;
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), theta) - edges_.begin()) - 1;
    const double before = i == 0 ? 0.0 : cumulative_[i - 1];
    return before + weights_[i] * (theta - edges_[i]) / (edges_[i + 1] - edges_[i]);
}

std::size_t MixingLaw::component_at(double u) const {
    if (u <= 0.0) {
        std::size_t i = 0;
        while (i + 1 < weights_.size() && weights_[i] <= 0.0) ++i;
        return i;
    }
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), weights_.size() - 1);
}

double MixingLaw::component_level(std::size_t i) const {
    const double before = i == 0 ? 0.0 : cumulative_[i - 1];
    return 0.5 * (before + cumulative_[i]);
}

double MixingLaw::quantile(double u) const {
    const std::size_t i = component_at(u);
    if (kind_ == Kind::atoms) return points_[i];
    const double before = i == 0 ? 0.0 : cumulative_[i - 1];
    if (u >= cumulative_[i] && i + 1 < weights_.size() && weights_[i + 1] <= 0.0) {
        std::size_t j = i + 1;
        while (j < weights_.size() && weights_[j] <= 0.0) ++j;
        if (j < weights_.size()) return 0.5 * (edges_[i + 1] + edges_[j]);
        return edges_[i + 1];
    }
    if (weights_[i] <= 0.0) return edges_[i];
    return edges_[i] + (u - before) / weights_[i] * (edges_[i + 1] - edges_[i]);
}

double MixingLaw::support_lo() const {
    std::size_t i = 0;
    while (i + 1 < weights_.size() && weights_[i] <= 0.0) ++i;
    return kind_ == Kind::atoms ? points_[i] : edges_[i];
}

double MixingLaw::support_hi() const {
    std::size_t i = weights_.size() - 1;
    while (i > 0 && weights_[i] <= 0.0) --i;
    return kind_ == Kind::atoms ? points_[i] : edges_[i + 1];
}

MixingLaw MixingLaw::with_weights(std::vector<double> weights) const {
    require(weights.size() == weights_.size(), "MixingLaw::with_weights: size mismatch");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    require(total > 0.0 && std::isfinite(total), "MixingLaw::with_weights: weights must carry finite mass");
    MixingLaw law = *this;
    for (double& w : weights) w /= total;
    law.weights_ = std::move(weights);
    law.cumulative_ = prefix_sums(law.weights_);
    return law;
}

void MgpDescriptor::validate() const {
    require(mixing.size() >= 1, "descriptor: empty mixing law");
    require(!maturities.empty(), "descriptor: empty maturity grid");
    require(x0 > 0.0, "descriptor: x0 must be positive");
    for (std::size_t k = 0; k < maturities.size(); ++k)
        require(maturities[k] > (k == 0 ? t0 : maturities[k - 1]), "descriptor: maturities must increase past t0");
    require(increments.size() == mixing.size(), "descriptor: one variance row per mixing component required");
    for (const auto& row : increments) {
        require(row.size() == maturities.size(), "descriptor: variance row length must match maturities");
        for (double v : row) require(v >= 0.0 && std::isfinite(v), "descriptor: variance increments must be >= 0");
    }
}

double MgpDescriptor::total_variance(std::size_t c, double t) const {
    if (t <= t0) return 0.0;
    if (t > horizon() + 1e-12 * std::max(1.0, horizon()))
        throw InputError("descriptor: time " + std::to_string(t) + " beyond the last maturity");
    const auto& row = increments[c];
    double prev = t0, total = 0.0;
    for (std::size_t k = 0; k < maturities.size(); ++k) {
        if (t <= maturities[k]) return total + row[k] * ((t - prev) / (maturities[k] - prev));
        total += row[k];
        prev = maturities[k];
    }
    return total;
}

double MgpDescriptor::variance_rate(std::size_t c, double t) const {
    double prev = t0;
    for (std::size_t k = 0; k < maturities.size(); ++k) {
        if (t < maturities[k] || k + 1 == maturities.size()) return increments[c][k] / (maturities[k] - prev);
        prev = maturities[k];
    }
    return 0.0;
}

std::vector<double> MgpDescriptor::cumulative(std::size_t c) const {
    std::vector<double> out(maturities.size());
    double total = 0.0;
    for (std::size_t k = 0; k < maturities.size(); ++k) out[k] = (total += increments[c][k]);
    return out;
}

MgpDescriptor variance_mixture_descriptor(const MixingLaw& law, double maturity, double x0, const RateCurve& rates) {
    MgpDescriptor d;
    d.mixing = law;
    d.maturities = {maturity};
    d.x0 = x0;
    d.rates = rates;
    for (std::size_t i = 0; i < law.size(); ++i) {
        require(law.point(i) >= 0.0, "variance_mixture_descriptor: total variances must be nonnegative");
        d.increments.push_back({law.point(i)});
    }
    if (law.kind() == MixingLaw::Kind::grid) {
        d.theta_lo = law.edges().front();
        d.theta_hi = law.edges().back();
    } else {
        d.theta_lo = law.points().front();
        d.theta_hi = law.points().back();
    }
    d.validate();
    return d;
}

ComponentDensity component_density(const MgpDescriptor& desc, std::size_t c, double x, double t) {
    require(x > 0.0, "component_density: x must be positive");
    require(t > desc.t0, "component_density: t must exceed t0");
    const double v = desc.total_variance(c, t);
    if (v <= 0.0) return {0.0, true};
    const double fwd = desc.forward(t);
    const double sd = std::sqrt(v);
    const double z = (std::log(x / fwd) + 0.5 * v) / sd;
    return {norm_pdf(z) / (x * sd), false};
}

double mixture_density(const MgpDescriptor& desc, double x, double t) {
    double total = 0.0;
    for (std::size_t i = 0; i < desc.mixing.size(); ++i) {
        if (desc.mixing.weight(i) <= 0.0) continue;
        const ComponentDensity p = component_density(desc, i, x, t);
        if (!p.degenerate) total += desc.mixing.weight(i) * p.value;
    }
    return total;
}

double mixture_cdf(const MgpDescriptor& desc, double x, double t) {
    require(x > 0.0 && t > desc.t0, "mixture_cdf: need x > 0 and t > t0");
    const double fwd = desc.forward(t);
    double total = 0.0;
    for (std::size_t i = 0; i < desc.mixing.size(); ++i) {
        const double w = desc.mixing.weight(i);
        if (w <= 0.0) continue;
        const double v = desc.total_variance(i, t);
        if (v <= 0.0)
            total += x >= fwd ? w : 0.0;
        else
            total += w * norm_cdf((std::log(x / fwd) + 0.5 * v) / std::sqrt(v));
    }
    return std::min(total, 1.0);
}

RiskNeutralSlice mixture_slice(const MgpDescriptor& desc, double t, std::size_t points, double span_sd) {
    desc.validate();
    std::vector<std::pair<double, double>> vw;
    for (std::size_t i = 0; i < desc.mixing.size(); ++i)
        if (desc.mixing.weight(i) > 0.0) vw.emplace_back(desc.total_variance(i, t), desc.mixing.weight(i));
    std::sort(vw.begin(), vw.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    // Ignore a far tail of total weight below 1e-10 when sizing the grid.
    double skipped = 0.0, v_max = 0.0;
    for (const auto& [v, w] : vw) {
        if (skipped + w <= 1e-10) {
            skipped += w;
            continue;
        }
        v_max = v;
        break;
    }
    require(v_max > 0.0, "mixture_slice: all components are degenerate at t=" + std::to_string(t));
    RiskNeutralSlice slice;
    slice.maturity = t;
    slice.forward = desc.forward(t);
    slice.x = log_spaced_grid(slice.forward, v_max, points, span_sd);
    slice.pdf.resize(slice.x.size());
    slice.cdf.resize(slice.x.size());
    for (std::size_t j = 0; j < slice.x.size(); ++j) {
        slice.pdf[j] = mixture_density(desc, slice.x[j], t);
        slice.cdf[j] = mixture_cdf(desc, slice.x[j], t);
    }
    for (std::size_t j = 1; j < slice.cdf.size(); ++j) slice.cdf[j] = std::max(slice.cdf[j], slice.cdf[j - 1]);
    return slice;
}

namespace {

void check_spec(const MgpDescriptor& desc, const EuropeanSpec& spec) {
    require(spec.strike > 0.0, "european: strike must be positive");
    require(spec.maturity > desc.t0, "european: maturity must exceed t0");
    require(spec.maturity <= desc.horizon() + 1e-12 * std::max(1.0, desc.horizon()),
            "european: maturity beyond the descriptor horizon");
}

} // namespace

double price_european(const MgpDescriptor& desc, const EuropeanSpec& spec) {
    check_spec(desc, spec);
    const double fwd = desc.forward(spec.maturity);
    const double df = desc.discount(spec.maturity);
    double price = 0.0;
    for (std::size_t i = 0; i < desc.mixing.size(); ++i) {
        const double w = desc.mixing.weight(i);
        if (w <= 0.0) continue;
        price += w * black_price(spec.kind, fwd, spec.strike, desc.total_variance(i, spec.maturity), df);
    }
    return price;
}

double implied_vol(const MgpDescriptor& desc, const EuropeanSpec& spec) {
    const double price = price_european(desc, spec);
    const double v = implied_total_variance(spec.kind, desc.forward(spec.maturity), spec.strike, price,
                                            desc.discount(spec.maturity));
    return std::sqrt(v / (spec.maturity - desc.t0));
}

Greeks greeks(const MgpDescriptor& desc, const EuropeanSpec& spec) {
    check_spec(desc, spec);
    const double fwd = desc.forward(spec.maturity);
    const double df = desc.discount(spec.maturity);
    const double growth = fwd / desc.x0;
    const double tau = spec.maturity - desc.t0;
    Greeks g;
    g.vega.assign(desc.mixing.size(), 0.0);
    for (std::size_t i = 0; i < desc.mixing.size(); ++i) {
        const double w = desc.mixing.weight(i);
        if (w <= 0.0) continue;
        const BlackSensitivities s =
            black_sensitivities(spec.kind, fwd, spec.strike, desc.total_variance(i, spec.maturity), df);
        g.delta += w * s.d_forward * growth;
        g.gamma += w * s.d2_forward * growth * growth;
        g.vega[i] = w * s.d_sqrt_var * std::sqrt(tau);
    }
    return g;
}

MgpDescriptor reparametrize_equivalent(const MgpDescriptor& desc, const MixingLaw& target) {
    desc.validate();
    require_invertible(desc.mixing, "reparametrize_equivalent (source)");
    require_invertible(target, "reparametrize_equivalent (target)");
    MgpDescriptor out = desc;
    out.mixing = target;
    out.increments.assign(target.size(), {});
    for (std::size_t j = 0; j < target.size(); ++j) {
        const std::size_t i = desc.mixing.component_at(target.component_level(j));
        out.increments[j] = desc.increments[i];
    }
    out.theta_lo = target.kind() == MixingLaw::Kind::grid ? target.edges().front() : target.points().front();
    out.theta_hi = target.kind() == MixingLaw::Kind::grid ? target.edges().back() : target.points().back();
    return out;
}

EquivalenceReport check_equivalence(const MgpDescriptor& a, const MgpDescriptor& b, std::size_t quantiles,
                                    double tolerance) {
    a.validate();
    b.validate();
    require(a.maturities.size() == b.maturities.size() && a.t0 == b.t0, "check_equivalence: maturity grids differ");
    for (std::size_t k = 0; k < a.maturities.size(); ++k)
        require(std::abs(a.maturities[k] - b.maturities[k]) <= 1e-12 * std::max(1.0, a.maturities[k]),
                "check_equivalence: maturity grids differ");
    EquivalenceReport report;
    for (std::size_t q = 0; q < quantiles; ++q) {
        const double u = (q + 0.5) / quantiles;
        const auto va = a.cumulative(a.mixing.component_at(u));
        const auto vb = b.cumulative(b.mixing.component_at(u));
        for (std::size_t k = 0; k < va.size(); ++k) {
            const double scale = std::max(std::abs(va[k]), std::abs(vb[k]));
            const double dev = scale > 0.0 ? std::abs(va[k] - vb[k]) / scale : 0.0;
            if (dev > report.max_deviation) {
                report.max_deviation = dev;
                report.at_quantile = u;
                report.at_maturity = a.maturities[k];
            }
        }
    }
    report.equivalent = report.max_deviation <= tolerance;
    return report;
}

StrongSolutionReport check_strong_solution(const MgpDescriptor& desc, double tau0, const std::vector<double>& growth) {
    desc.validate();
    require(tau0 > 0.0, "check_strong_solution: tau0 must be positive");
    const std::size_t n = desc.mixing.size();
    std::vector<double> f = growth;
    if (f.empty()) {
        f.assign(n, 0.0);
        const double r_sup = desc.rates.max_rate();
        for (std::size_t i = 0; i < n; ++i) {
            double nu_sup = 0.0;
            double prev = desc.t0;
            for (std::size_t k = 0; k < desc.maturities.size(); ++k) {
                nu_sup = std::max(nu_sup, desc.increments[i][k] / (desc.maturities[k] - prev));
                prev = desc.maturities[k];
            }
            f[i] = std::max(r_sup, std::sqrt(nu_sup));
        }
    }
    require(f.size() == n, "check_strong_solution: growth bound needs one value per component");
    for (double v : f)
        require(std::isfinite(v) && v >= 0.0, "check_strong_solution: growth bound is not derivable (non-finite)");

    StrongSolutionReport r;
    r.c0 = 10.0 * (tau0 * tau0 + tau0);
    double log_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (desc.mixing.weight(i) > 0.0) log_max = std::max(log_max, std::log(desc.mixing.weight(i)) + r.c0 * f[i] * f[i]);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (desc.mixing.weight(i) > 0.0) acc += std::exp(std::log(desc.mixing.weight(i)) + r.c0 * f[i] * f[i] - log_max);
    const double log_value = log_max + std::log(acc);
    r.value = log_value > 709.0 ? std::numeric_limits<double>::infinity() : std::exp(log_value);
    if (!std::isfinite(r.value)) {
        r.finite = false;
        r.detail = "integral overflows double precision";
        return r;
    }
    // On an unbounded parameter set the grid is a truncation; compare the
    // density's decay in f^2 against the exponential growth rate C0.
    if (desc.mixing.kind() == MixingLaw::Kind::grid && !std::isfinite(desc.theta_hi)) {
        const auto dens = desc.mixing.density();
        std::vector<std::size_t> pos;
        for (std::size_t i = 0; i < n; ++i)
            if (dens[i] > 0.0) pos.push_back(i);
        const std::size_t take = std::max<std::size_t>(4, pos.size() / 4);
        if (pos.size() >= 4) {
            std::vector<double> xs, ys;
            for (std::size_t q = pos.size() - std::min(take, pos.size()); q < pos.size(); ++q) {
                xs.push_back(f[pos[q]] * f[pos[q]]);
                ys.push_back(std::log(dens[pos[q]]));
            }
            if (xs.back() > xs.front()) {
                r.tail_rate = -ols_slope(xs, ys);
                if (r.tail_rate <= r.c0) {
                    r.finite = false;
                    r.detail = "density tail decays like exp(-" + std::to_string(r.tail_rate) +
                               " f^2), not faster than exp(-C0 f^2) with C0=" + std::to_string(r.c0);
                    return r;
                }
            }
        }
    }
    r.detail = "finite";
    return r;
}

} // namespace mixvol
