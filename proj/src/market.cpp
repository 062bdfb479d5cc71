#include "mixvol/market.hpp"

#include "mixvol/black_scholes.hpp"
#include "mixvol/errors.hpp"
#include "mixvol/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixvol {

RateCurve::RateCurve(std::vector<double> times, std::vector<double> rates)
    : times_(std::move(times)), rates_(std::move(rates)) {
    require(!times_.empty() && times_.size() == rates_.size(), "RateCurve: need matching knot lists");
    require(times_.front() == 0.0, "RateCurve: first knot must be at time 0");
    for (std::size_t i = 1; i < times_.size(); ++i)
        require(times_[i] > times_[i - 1], "RateCurve: knot times must be strictly increasing");
    for (double r : rates_) require(std::isfinite(r), "RateCurve: rates must be finite");
}

double RateCurve::integral(double a, double b) const {
    if (a > b) return -integral(b, a);
    double total = 0.0;
    for (std::size_t i = 0; i < times_.size(); ++i) {
        const double lo = std::max(a, times_[i]);
        const double hi = std::min(b, i + 1 < times_.size() ? times_[i + 1] : b);
        if (hi > lo) total += rates_[i] * (hi - lo);
    }
    // Times before the first knot use the first rate.
    if (a < times_.front()) total += rates_.front() * (std::min(b, times_.front()) - a);
    return total;
}

double RateCurve::rate(double t) const {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return rates_.front();
    return rates_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double RateCurve::max_rate() const { return *std::max_element(rates_.begin(), rates_.end()); }

double ForwardCurve::forward(double t) const {
    if (t < t0) throw InputError("forward: time " + std::to_string(t) + " precedes t0");
    return x0 * std::exp(rates.integral(t0, t));
}

double ForwardCurve::discount(double t) const {
    if (t < t0) throw InputError("discount: time " + std::to_string(t) + " precedes t0");
    return std::exp(-rates.integral(t0, t));
}

double forward(const ForwardCurve& curve, double t) { return curve.forward(t); }

double RiskNeutralSlice::cdf_at(double value) const {
    if (value <= x.front()) return 0.0;
    if (value >= x.back()) return 1.0;
    return interp_linear(x, cdf, value);
}

namespace {

/// x f(x) over log x, the quadrature used for every slice integral.
std::vector<double> log_nodes(const RiskNeutralSlice& s, std::vector<double>& weighted, int power) {
    std::vector<double> y(s.x.size());
    weighted.resize(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        y[i] = std::log(s.x[i]);
        weighted[i] = s.pdf[i] * std::pow(s.x[i], power);
    }
    return y;
}

} // namespace

double slice_mass(const RiskNeutralSlice& slice) {
    std::vector<double> f;
    const std::vector<double> y = log_nodes(slice, f, 1);
    return trapezoid(y, f);
}

double slice_mean(const RiskNeutralSlice& slice) {
    std::vector<double> f;
    const std::vector<double> y = log_nodes(slice, f, 2);
    return trapezoid(y, f);
}

void rebuild_cdf(RiskNeutralSlice& slice) {
    std::vector<double> f;
    const std::vector<double> y = log_nodes(slice, f, 1);
    slice.cdf = cumulative_trapezoid(y, f);
    const double total = slice.cdf.back();
    require(total > 0.0, "rebuild_cdf: density has zero mass");
    for (double& c : slice.cdf) c /= total;
}

void validate_slice(const RiskNeutralSlice& slice) {
    require(slice.x.size() >= 3 && slice.pdf.size() == slice.x.size() && slice.cdf.size() == slice.x.size(),
            "slice: grid, pdf and cdf must have equal length >= 3");
    for (std::size_t i = 0; i < slice.x.size(); ++i) {
        require(slice.x[i] > 0.0 && (i == 0 || slice.x[i] > slice.x[i - 1]),
                "slice: grid must be ascending and positive");
        require(slice.pdf[i] >= 0.0 && std::isfinite(slice.pdf[i]), "slice: density must be nonnegative");
        require(slice.cdf[i] >= -1e-12 && slice.cdf[i] <= 1.0 + 1e-12 && (i == 0 || slice.cdf[i] >= slice.cdf[i - 1]),
                "slice: cdf must be monotone in [0,1]");
    }
    const double mass = slice_mass(slice);
    require(std::abs(mass - 1.0) <= 1e-6, "slice: density mass " + std::to_string(mass) + " differs from 1");
    const double mean = slice_mean(slice);
    require(std::abs(mean / slice.forward - 1.0) <= 1e-3,
            "slice: mean " + std::to_string(mean) + " violates the martingale condition");
}

LogMoneynessDensity to_log_moneyness(const RiskNeutralSlice& slice) {
    require(slice.forward > 0.0, "to_log_moneyness: forward must be positive");
    LogMoneynessDensity out;
    out.maturity = slice.maturity;
    out.y.resize(slice.x.size());
    out.pdf.resize(slice.x.size());
    for (std::size_t i = 0; i < slice.x.size(); ++i) {
        out.y[i] = std::log(slice.x[i] / slice.forward);
        out.pdf[i] = slice.x[i] * slice.pdf[i];
    }
    // The Jacobian is exact, so the y mass is the slice mass; a large gap to
    // the x-space trapezoid means the grid under-resolves the density.
    const double mass_x = trapezoid(slice.x, slice.pdf);
    const double mass_y = trapezoid(out.y, out.pdf);
    if (!(std::abs(mass_y - mass_x) <= 1e-4))
        throw GridError("to_log_moneyness: grid too coarse, mass changes from " + std::to_string(mass_x) +
                        " to " + std::to_string(mass_y));
    return out;
}

RiskNeutralSlice from_log_moneyness(const LogMoneynessDensity& density, double fwd) {
    require(fwd > 0.0, "from_log_moneyness: forward must be positive");
    RiskNeutralSlice out;
    out.maturity = density.maturity;
    out.forward = fwd;
    out.x.resize(density.y.size());
    out.pdf.resize(density.y.size());
    for (std::size_t i = 0; i < density.y.size(); ++i) {
        out.x[i] = fwd * std::exp(density.y[i]);
        out.pdf[i] = density.pdf[i] / out.x[i];
    }
    const double mass_y = trapezoid(density.y, density.pdf);
    const double mass_x = trapezoid(out.x, out.pdf);
    if (!(std::abs(mass_y - mass_x) <= 1e-4))
        throw GridError("from_log_moneyness: grid too coarse to preserve mass");
    rebuild_cdf(out);
    return out;
}

std::vector<double> log_spaced_grid(double fwd, double total_var, std::size_t points, double span_sd) {
    require(fwd > 0.0 && total_var > 0.0 && points >= 3 && span_sd > 0.0,
            "log_spaced_grid: need positive forward, variance, span and >= 3 points");
    const double sd = std::sqrt(total_var);
    const double centre = -0.5 * total_var;
    std::vector<double> x(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double y = centre + span_sd * sd * (2.0 * i / (points - 1.0) - 1.0);
        x[i] = fwd * std::exp(y);
    }
    return x;
}

std::vector<double> convex_clean(const std::vector<double>& k, const std::vector<double>& p, double fwd) {
    const std::size_t n = k.size();
    // Constraints a.c >= b, each touching at most three neighbouring prices.
    struct Row {
        std::size_t first;
        double a[3];
        std::size_t len;
        double b;
        double norm2;
    };
    std::vector<Row> rows;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hl = k[i] - k[i - 1], hr = k[i + 1] - k[i];
        rows.push_back({i - 1, {1.0 / hl, -1.0 / hl - 1.0 / hr, 1.0 / hr}, 3, 0.0, 0.0});
    }
    const double h0 = k[1] - k[0], hn = k[n - 1] - k[n - 2];
    rows.push_back({0, {-1.0 / h0, 1.0 / h0, 0.0}, 2, -1.0, 0.0});
    rows.push_back({n - 2, {1.0 / hn, -1.0 / hn, 0.0}, 2, 0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) rows.push_back({i, {1.0, 0.0, 0.0}, 1, std::max(fwd - k[i], 0.0), 0.0});
    for (auto& r : rows) {
        r.norm2 = 0.0;
        for (std::size_t j = 0; j < r.len; ++j) r.norm2 += r.a[j] * r.a[j];
    }
    std::vector<double> c = p;
    std::vector<double> lambda(rows.size(), 0.0);
    const double tol = 1e-13 * fwd;
    for (int sweep = 0; sweep < 200000; ++sweep) {
        double worst = 0.0;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const Row& r = rows[j];
            double ac = 0.0;
            for (std::size_t q = 0; q < r.len; ++q) ac += r.a[q] * c[r.first + q];
            const double gap = r.b - ac;
            const double next = std::max(0.0, lambda[j] + gap / r.norm2);
            const double delta = next - lambda[j];
            if (delta != 0.0) {
                for (std::size_t q = 0; q < r.len; ++q) c[r.first + q] += delta * r.a[q];
                lambda[j] = next;
            }
            worst = std::max(worst, std::abs(delta) * std::sqrt(r.norm2));
        }
        if (worst < tol) break;
    }
    return c;
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    require(n >= 1 && y_.size() == n, "Pchip: need matching nonempty data");
    slope_.assign(n, 0.0);
    if (n < 2) return;
    std::vector<double> sec(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) sec[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    if (n == 2) {
        slope_[0] = slope_[1] = sec[0];
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (sec[i - 1] * sec[i] <= 0.0) continue;
        const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
        const double w0 = 2.0 * h1 + h0, w1 = h1 + 2.0 * h0;
        slope_[i] = (w0 + w1) / (w0 / sec[i - 1] + w1 / sec[i]);
    }
    auto end_slope = [](double h0, double h1, double s0, double s1) {
        double d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
        if (d * s0 <= 0.0) return 0.0;
        if (s0 * s1 <= 0.0 && std::abs(d) > 3.0 * std::abs(s0)) return 3.0 * s0;
        return d;
    };
    slope_[0] = end_slope(x_[1] - x_[0], x_[2] - x_[1], sec[0], sec[1]);
    slope_[n - 1] = end_slope(x_[n - 1] - x_[n - 2], x_[n - 2] - x_[n - 3], sec[n - 2], sec[n - 3]);
}

double Pchip::operator()(double at) const {
    if (at <= x_.front()) return y_.front();
    if (at >= x_.back()) return y_.back();
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), at) - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double t = (at - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * slope_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * slope_[i + 1];
}

RiskNeutralSlice chain_to_density(const OptionChain& chain, ChainDiagnostics* diagnostics,
                                  const ChainOptions& options) {
    const std::size_t n = chain.strikes.size();
    require(n >= 5, "chain_to_density: need at least 5 strikes, got " + std::to_string(n));
    require(chain.calls.size() == n, "chain_to_density: strikes and calls differ in length");
    require(chain.forward > 0.0 && chain.maturity > 0.0, "chain_to_density: need positive forward and maturity");
    require(chain.discount > 0.0, "chain_to_density: discount must be positive");
    for (std::size_t i = 0; i < n; ++i) {
        require(chain.strikes[i] > 0.0 && (i == 0 || chain.strikes[i] > chain.strikes[i - 1]),
                "chain_to_density: strikes must be ascending and positive");
        require(chain.calls[i] > 0.0 && std::isfinite(chain.calls[i]), "chain_to_density: call prices must be positive");
    }
    const double fwd = chain.forward;
    std::vector<double> quoted(n);
    for (std::size_t i = 0; i < n; ++i) quoted[i] = chain.calls[i] / chain.discount;
    const std::vector<double> cleaned = convex_clean(chain.strikes, quoted, fwd);

    ChainDiagnostics diag;
    diag.cleaned_calls = cleaned;
    for (std::size_t i = 0; i < n; ++i) {
        const double adj = cleaned[i] - quoted[i];
        if (std::abs(adj) > options.repair_report * fwd) diag.repairs.push_back({i, chain.strikes[i], adj});
        diag.max_adjustment = std::max(diag.max_adjustment, std::abs(adj));
    }
    std::sort(diag.repairs.begin(), diag.repairs.end(),
              [](const ChainRepair& a, const ChainRepair& b) { return std::abs(a.adjustment) > std::abs(b.adjustment); });
    if (diagnostics) *diagnostics = diag;
    if (diag.max_adjustment > options.repair_limit * fwd)
        throw CalibrationError("chain_to_density: arbitrage beyond tolerance, worst strike " +
                               std::to_string(diag.repairs.front().strike) + " needs repair " +
                               std::to_string(diag.repairs.front().adjustment));

    // Out-of-the-money implied total variance per strike.
    std::vector<double> ys, vs;
    for (std::size_t i = 0; i < n; ++i) {
        const double k = chain.strikes[i];
        const bool use_put = k < fwd;
        const double price = use_put ? cleaned[i] - (fwd - k) : cleaned[i];
        if (price <= 1e-12 * fwd) continue;
        try {
            vs.push_back(implied_total_variance(use_put ? OptionKind::put : OptionKind::call, fwd, k, price, 1.0));
            ys.push_back(std::log(k / fwd));
        } catch (const InputError&) {
            continue;
        }
    }
    if (vs.size() < 2) throw CalibrationError("chain_to_density: fewer than two strikes carry time value");
    const Pchip smile(ys, vs);
    const double v_max = *std::max_element(vs.begin(), vs.end());

    RiskNeutralSlice slice;
    slice.maturity = chain.maturity;
    slice.forward = fwd;
    slice.x = log_spaced_grid(fwd, v_max, options.points, options.span_sd);
    const std::size_t m = slice.x.size();
    std::vector<double> call(m);
    for (std::size_t j = 0; j < m; ++j)
        call[j] = black_price(OptionKind::call, fwd, slice.x[j], smile(std::log(slice.x[j] / fwd)), 1.0);
    // Call slopes are the CDF at cell midpoints. Where the interpolated smile
    // is not convex they fall somewhere; a width-weighted isotonic fit keeps
    // the integral of the CDF, and with it the mean, intact.
    std::vector<double> slope(m - 1), width(m - 1);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        width[j] = slice.x[j + 1] - slice.x[j];
        slope[j] = (call[j + 1] - call[j]) / width[j];
    }
    slope = isotonic_increasing(slope, width);
    slice.pdf.assign(m, 0.0);
    for (std::size_t j = 1; j + 1 < m; ++j)
        slice.pdf[j] = std::max(2.0 * (slope[j] - slope[j - 1]) / (width[j - 1] + width[j]), 0.0);
    // Edge nodes lie in the lognormal tails implied by flat extrapolation.
    for (std::size_t j : {std::size_t{0}, m - 1}) {
        const double v = smile(std::log(slice.x[j] / fwd));
        const double z = (std::log(slice.x[j] / fwd) + 0.5 * v) / std::sqrt(v);
        slice.pdf[j] = norm_pdf(z) / (slice.x[j] * std::sqrt(v));
    }
    const double mass = slice_mass(slice);
    for (double& d : slice.pdf) d /= mass;
    rebuild_cdf(slice);
    return slice;
}

OptionChain black_chain(double fwd, double maturity, double sigma, const std::vector<double>& strikes,
                        double discount) {
    OptionChain chain;
    chain.maturity = maturity;
    chain.forward = fwd;
    chain.discount = discount;
    chain.strikes = strikes;
    for (double k : strikes) chain.calls.push_back(black_price(OptionKind::call, fwd, k, sigma * sigma * maturity, discount));
    return chain;
}

} // namespace mixvol
