#include "mixvol/recovery.hpp"

#include "mixvol/errors.hpp"
#include "mixvol/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mixvol {

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments log_moments(const LogMoneynessDensity& e) {
    std::vector<double> f(e.y.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = e.y[i] * e.pdf[i];
    Moments m;
    const double mass = trapezoid(e.y, e.pdf);
    m.mean = trapezoid(e.y, f) / mass;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (e.y[i] - m.mean) * (e.y[i] - m.mean) * e.pdf[i];
    m.var = trapezoid(e.y, f) / mass;
    return m;
}

double max_spacing(const std::vector<double>& y) {
    double h = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) h = std::max(h, y[i] - y[i - 1]);
    return h;
}

// Tail beyond an end node, assuming locally exponential decay.
double tail_estimate(double edge, double inner, double step, double span) {
    if (edge <= 0.0) return 0.0;
    if (inner > edge) return edge * step / std::log(inner / edge);
    return edge * span;
}

} // namespace

cplx char_function(const LogMoneynessDensity& e, cplx xi, double* truncation) {
    const std::size_t n = e.y.size();
    require(n >= 3 && e.pdf.size() == n, "char_function: density needs >= 3 matching points");
    const cplx i_xi = cplx(0.0, 1.0) * xi;
    cplx sum(0.0, 0.0);
    cplx prev = e.pdf[0] * std::exp(i_xi * e.y[0]);
    const cplx first = prev;
    cplx last = prev;
    for (std::size_t k = 1; k < n; ++k) {
        const cplx cur = e.pdf[k] * std::exp(i_xi * e.y[k]);
        sum += 0.5 * (prev + cur) * (e.y[k] - e.y[k - 1]);
        prev = cur;
        last = cur;
    }
    const double span = e.y.back() - e.y.front();
    const double lo = tail_estimate(std::abs(first), std::abs(e.pdf[1] * std::exp(i_xi * e.y[1])), e.y[1] - e.y[0], span);
    const double hi = tail_estimate(std::abs(last), std::abs(e.pdf[n - 2] * std::exp(i_xi * e.y[n - 2])),
                                    e.y[n - 1] - e.y[n - 2], span);
    const double trunc = lo + hi;
    if (truncation) *truncation = trunc;
    if (!(trunc <= 1e-6)) {
        std::ostringstream os;
        os << "char_function: truncation estimate " << trunc << " exceeds 1e-6 at xi=" << xi << "; widen the grid";
        throw GridError(os.str());
    }
    return sum;
}

std::vector<double> default_eta_grid(const LogMoneynessDensity& e, double tau, std::size_t points) {
    require(tau > 0.0 && points >= 3, "default_eta_grid: need tau > 0 and >= 3 points");
    const Moments m = log_moments(e);
    const double a_max = std::numbers::pi / (2.0 * max_spacing(e.y));
    const double eta_max = 0.5 * tau * (a_max * a_max + 0.25);
    const double eta_min = 1e-4 * tau / std::max(m.var, 1e-12);
    require(eta_max > eta_min, "default_eta_grid: grid too coarse for the density's spread");
    std::vector<double> eta{0.0};
    const double l0 = std::log(eta_min), l1 = std::log(eta_max);
    for (std::size_t i = 0; i + 1 < points; ++i) eta.push_back(std::exp(l0 + (l1 - l0) * i / (points - 2.0)));
    return eta;
}

TransformProfile build_G(const LogMoneynessDensity& e, const std::vector<double>& eta, double tau) {
    require(tau > 0.0, "build_G: tau must be positive");
    TransformProfile p;
    p.maturity = e.maturity;
    p.tau = tau;
    p.eta = eta;
    p.g.resize(eta.size());
    // Quadrature mass of E on its own grid; dividing by it pins G(0) = 1.
    const double mass = char_function(e, cplx(0.0, 0.0)).real();
    for (std::size_t i = 0; i < eta.size(); ++i) {
        require(eta[i] >= 0.0 && (i == 0 || eta[i] > eta[i - 1]), "build_G: eta grid must be ascending and >= 0");
        const cplx xi = std::sqrt(cplx(2.0 * eta[i] / tau - 0.25, 0.0)) - cplx(0.0, 0.5);
        double trunc = 0.0;
        const cplx value = char_function(e, xi, &trunc);
        p.g[i] = value.real() / mass;
        p.imag_residue = std::max(p.imag_residue, std::abs(value.imag()) / mass);
        p.truncation = std::max(p.truncation, trunc);
    }
    if (p.imag_residue > 1e-6)
        throw InputError("build_G: imaginary residue " + std::to_string(p.imag_residue) +
                         " is inconsistent with any lognormal mixture");
    return p;
}

TransformProfile build_G(const LogMoneynessDensity& e, double tau) { return build_G(e, default_eta_grid(e, tau), tau); }

TransformProfile profile_from_function(const std::function<double(double)>& g, const std::vector<double>& eta,
                                       double tau) {
    TransformProfile p;
    p.tau = tau;
    p.eta = eta;
    for (double x : eta) p.g.push_back(g(x));
    return p;
}

MonotoneReport check_completely_monotone(const TransformProfile& profile, int max_order) {
    require(max_order >= 0 && max_order <= 6, "check_completely_monotone: max_order must lie in [0, 6]");
    // Thin to a log-spaced subset so divided differences stay well conditioned.
    std::vector<double> x, g;
    for (std::size_t i = 0; i < profile.eta.size(); ++i) {
        const double e = profile.eta[i];
        if (x.empty() || (x.back() == 0.0 && e > 0.0) || e >= 1.15 * x.back()) {
            x.push_back(e);
            g.push_back(profile.g[i]);
        }
    }
    double g_scale = 0.0;
    for (double v : g) g_scale = std::max(g_scale, std::abs(v));
    // Samples cannot be screened below their own quadrature noise.
    const double noise = std::max(1e-13 * g_scale, 10.0 * std::max(profile.imag_residue, profile.truncation));
    MonotoneReport report;
    for (int n = 0; n <= max_order; ++n) {
        for (std::size_t start = 0; start + n < x.size(); ++start) {
            double dd = 0.0, weighted = 0.0, coeffs = 0.0;
            for (int j = 0; j <= n; ++j) {
                double c = 1.0;
                for (int l = 0; l <= n; ++l)
                    if (l != j) c /= (x[start + j] - x[start + l]);
                dd += c * g[start + j];
                weighted += std::abs(c * g[start + j]);
                coeffs += std::abs(c);
            }
            const double signed_dd = (n % 2 == 0 ? 1.0 : -1.0) * dd;
            const double tol = 1e-7 * weighted + noise * coeffs;
            if (signed_dd < -tol) {
                report.pass = false;
                report.order = n;
                report.eta = x[start];
                report.value = signed_dd;
                return report;
            }
        }
    }
    return report;
}

MixingLaw RecoveredMixing::to_mixing_law() const {
    std::vector<double> masses(theta.size() - 1);
    for (std::size_t i = 0; i + 1 < theta.size(); ++i) masses[i] = std::max(cdf[i + 1] - cdf[i], 0.0);
    return MixingLaw::grid_from_masses(theta, masses);
}

double RecoveredMixing::cdf_at(double t) const { return interp_linear(theta, cdf, t); }

std::vector<double> default_theta_grid(const LogMoneynessDensity& e, double tau, std::size_t cells) {
    require(cells >= 2, "default_theta_grid: need at least two cells");
    const double theta_max = 8.0 * log_moments(e).var / tau;
    std::vector<double> theta(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) theta[i] = theta_max * i / cells;
    return theta;
}

namespace {

std::vector<double> checked_theta(const std::vector<double>& theta) {
    require(theta.size() >= 2, "invert_laplace: need at least two theta nodes");
    for (std::size_t i = 0; i < theta.size(); ++i)
        require(theta[i] >= 0.0 && (i == 0 || theta[i] > theta[i - 1]), "invert_laplace: theta grid must ascend from >= 0");
    return theta;
}

MonotoneReport screen(const TransformProfile& profile, const InversionOptions& options) {
    MonotoneReport report;
    if (options.screen_order < 0) return report;
    report = check_completely_monotone(profile, options.screen_order);
    if (!report.pass && !options.force) {
        std::ostringstream os;
        os << "invert_laplace: transform fails the complete-monotonicity screen at order " << report.order
           << ", eta=" << report.eta;
        throw CalibrationError(os.str());
    }
    return report;
}

/// Samples carry quadrature noise; fitting below it only adds spurious poles.
double fit_tolerance(const TransformProfile& profile, const InversionOptions& options) {
    return std::max(options.fit_tolerance, 100.0 * std::max(profile.imag_residue, profile.truncation));
}

RecoveredMixing invert_with(const TransformProfile& profile, const std::vector<double>& theta,
                            const InversionOptions& options, const AaaFit& fit, InversionDiagnostics diag) {
    const RationalApproximant& r = fit.approximant;
    diag.fit_degree = r.degree();
    diag.fit_error = fit.max_error;
    diag.right_poles = fit.right_poles;

    const std::size_t n = theta.size();
    std::vector<double> raw_cdf(n, 0.0), raw_density(n, 0.0);
    const auto cdf_transform = [&r](cplx s) { return r(s) / s; };
    const auto density_transform = [&r](cplx s) { return r(s); };
    for (std::size_t i = 0; i < n; ++i) {
        if (theta[i] <= 0.0) continue;
        if (options.method == InversionMethod::talbot) {
            raw_cdf[i] = talbot_inverse(cdf_transform, theta[i], options.talbot_nodes);
            raw_density[i] = talbot_inverse(density_transform, theta[i], options.talbot_nodes);
        } else {
            raw_cdf[i] = stehfest_inverse([&r](double s) { return r(s) / s; }, theta[i], options.stehfest_terms);
            raw_density[i] = stehfest_inverse([&r](double s) { return r(s); }, theta[i], options.stehfest_terms);
        }
    }
    diag.method = options.method == InversionMethod::talbot ? "talbot" : "stehfest";
    diag.talbot_nodes = options.method == InversionMethod::talbot ? options.talbot_nodes : 0;

    std::vector<double> z = isotonic_increasing(raw_cdf);
    for (double& v : z) v = std::clamp(v, 0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) diag.cdf_repair = std::max(diag.cdf_repair, std::abs(z[i] - raw_cdf[i]));
    const double top = z.back();
    if (!(top > 0.0)) throw CalibrationError("invert_laplace: recovered CDF carries no mass on the theta grid");
    diag.renormalization = 1.0 / top;
    for (double& v : z) v /= top;

    std::vector<double> pos(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
        pos[i] = std::max(raw_density[i], 0.0);
        neg[i] = std::max(-raw_density[i], 0.0);
    }
    const double pos_mass = trapezoid(theta, pos), neg_mass = trapezoid(theta, neg);
    diag.clipped_mass = pos_mass + neg_mass > 0.0 ? neg_mass / (pos_mass + neg_mass) : 0.0;

    RecoveredMixing out;
    out.theta = theta;
    out.cdf = z;
    out.density = pos;
    if (pos_mass > 0.0)
        for (double& d : out.density) d /= pos_mass;
    out.diagnostics = diag;
    if (diag.cdf_repair > options.failure_threshold) {
        std::ostringstream os;
        os << "invert_laplace: inversion failed, CDF repair " << diag.cdf_repair << " (clipped density mass "
           << diag.clipped_mass << ", fit degree " << diag.fit_degree << ")";
        throw CalibrationError(os.str());
    }
    return out;
}

} // namespace

RecoveredMixing invert_laplace(const TransformProfile& profile, const std::vector<double>& theta,
                               const InversionOptions& options) {
    checked_theta(theta);
    InversionDiagnostics diag;
    diag.screen = screen(profile, options);
    // Rational continuation of the real-axis samples to the complex contour.
    const AaaFit fit = aaa_fit(profile.eta, profile.g, fit_tolerance(profile, options), options.max_support);
    return invert_with(profile, theta, options, fit, diag);
}

namespace {

/// Laplace transform of a unit mass spread uniformly over [a, b].
double cell_kernel(double eta, double a, double b) {
    const double x = eta * (b - a);
    if (x < 1e-8) return std::exp(-eta * 0.5 * (a + b));
    return std::exp(-eta * a) * -std::expm1(-x) / x;
}

std::vector<double> masses_of(const RecoveredMixing& r) {
    std::vector<double> m(r.theta.size() - 1);
    for (std::size_t i = 0; i + 1 < r.theta.size(); ++i) m[i] = std::max(r.cdf[i + 1] - r.cdf[i], 0.0);
    return m;
}

/// Lawson-Hanson active set for min |Ax - b|, x >= 0.
Eigen::VectorXd nonnegative_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index n = a.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> active(n, false);
    const double scale = a.cwiseAbs().maxCoeff() * b.cwiseAbs().maxCoeff();
    const double tol = 1e-16 * std::max(scale, 1e-300) * static_cast<double>(a.rows());
    const int max_outer = static_cast<int>(3 * n);
    for (int outer = 0; outer < max_outer; ++outer) {
        const Eigen::VectorXd w = a.transpose() * (b - a * x);
        Eigen::Index pick = -1;
        double best = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!active[j] && w[j] > best) {
                best = w[j];
                pick = j;
            }
        if (pick < 0) break;
        active[pick] = true;
        for (int inner = 0; inner <= n; ++inner) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < n; ++j)
                if (active[j]) idx.push_back(j);
            Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t k = 0; k < idx.size(); ++k) sub.col(k) = a.col(idx[k]);
            const Eigen::VectorXd z = sub.colPivHouseholderQr().solve(b);
            if (z.minCoeff() > 0.0) {
                x.setZero();
                for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] = z[k];
                break;
            }
            double alpha = 1.0;
            for (std::size_t k = 0; k < idx.size(); ++k)
                if (z[k] <= 0.0) alpha = std::min(alpha, x[idx[k]] / (x[idx[k]] - z[k]));
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const Eigen::Index j = idx[k];
                x[j] += alpha * (z[k] - x[j]);
                if (x[j] <= 0.0) {
                    x[j] = 0.0;
                    active[j] = false;
                }
            }
        }
    }
    return x;
}

/// Average of the quantile function over [u0, u1] for CDF nodes (theta, z)
/// with linear interpolation in between.
double band_mean(const std::vector<double>& theta, const std::vector<double>& z, double u0, double u1) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < theta.size(); ++j) {
        const double lo = std::max(z[j], u0), hi = std::min(z[j + 1], u1);
        if (!(hi > lo)) continue;
        const double span = z[j + 1] - z[j];
        const auto at = [&](double u) { return theta[j] + (theta[j + 1] - theta[j]) * (u - z[j]) / span; };
        acc += (hi - lo) * 0.5 * (at(lo) + at(hi));
    }
    return acc / (u1 - u0);
}

} // namespace

double transform_residual(const TransformProfile& profile, const std::vector<double>& theta,
                          const std::vector<double>& masses) {
    require(masses.size() + 1 == theta.size(), "transform_residual: one mass per theta cell");
    double worst = 0.0;
    for (std::size_t i = 0; i < profile.eta.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < masses.size(); ++j)
            if (masses[j] > 0.0) s += masses[j] * cell_kernel(profile.eta[i], theta[j], theta[j + 1]);
        worst = std::max(worst, std::abs(s - profile.g[i]));
    }
    return worst;
}

RecoveredMixing fit_transform_masses(const TransformProfile& profile, const std::vector<double>& theta) {
    require(theta.size() >= 2, "fit_transform_masses: need at least two theta nodes");
    require(profile.eta.size() == profile.g.size() && !profile.eta.empty(), "fit_transform_masses: empty profile");
    const Eigen::Index m = static_cast<Eigen::Index>(profile.eta.size());
    const Eigen::Index n = static_cast<Eigen::Index>(theta.size() - 1);
    // The last row carries the unit-mass constraint with a heavy weight.
    const double weight = 100.0;
    Eigen::MatrixXd a(m + 1, n);
    Eigen::VectorXd b(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = cell_kernel(profile.eta[i], theta[j], theta[j + 1]);
        b[i] = profile.g[i];
    }
    a.row(m).setConstant(weight);
    b[m] = weight;
    const Eigen::VectorXd x = nonnegative_least_squares(a, b);
    const double total = x.sum();
    if (!(total > 0.0)) throw CalibrationError("fit_transform_masses: no mass fits the transform");

    RecoveredMixing out;
    out.theta = theta;
    out.cdf.assign(theta.size(), 0.0);
    out.density.assign(theta.size(), 0.0);
    std::vector<double> masses(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        masses[j] = x[j] / total;
        out.cdf[j + 1] = out.cdf[j] + masses[j];
    }
    out.cdf.back() = 1.0;
    // Node density averages the adjacent cell densities.
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double d = 0.0;
        int count = 0;
        if (i > 0) d += masses[i - 1] / (theta[i] - theta[i - 1]), ++count;
        if (i + 1 < theta.size()) d += masses[i] / (theta[i + 1] - theta[i]), ++count;
        out.density[i] = d / count;
    }
    out.diagnostics.method = "nnls";
    out.diagnostics.refit = true;
    out.diagnostics.renormalization = 1.0 / total;
    out.diagnostics.transform_residual = transform_residual(profile, theta, masses);
    return out;
}

RecoveredMixing recover_mixing(const TransformProfile& g, const std::vector<double>& theta,
                               const InversionOptions& options) {
    checked_theta(theta);
    InversionDiagnostics first;
    first.screen = screen(g, options);
    // The most accurate continuation can still carry a spurious pole; later
    // and earlier members of the greedy sequence are tried in fit order.
    std::vector<AaaFit> seq = aaa_sequence(g.eta, g.g, fit_tolerance(g, options), options.max_support);
    std::stable_sort(seq.begin(), seq.end(), [](const AaaFit& a, const AaaFit& b) { return a.max_error < b.max_error; });
    RecoveredMixing rec;
    std::string failure;
    const std::size_t tries = std::min(seq.size(), std::max<std::size_t>(options.continuation_candidates, 1));
    for (std::size_t c = 0; c < tries; ++c) {
        std::string why;
        try {
            RecoveredMixing attempt = invert_with(g, theta, options, seq[c], first);
            attempt.diagnostics.transform_residual = transform_residual(g, theta, masses_of(attempt));
            attempt.diagnostics.continuation_rank = c;
            if (attempt.diagnostics.transform_residual > options.refit_threshold)
                why = "transform residual " + std::to_string(attempt.diagnostics.transform_residual);
            if (c == 0) rec = attempt;
            if (why.empty()) return attempt;
        } catch (const CalibrationError& err) {
            why = err.what();
        }
        if (c == 0) failure = why;
    }
    const InversionDiagnostics contour = rec.diagnostics;
    rec = fit_transform_masses(g, theta);
    if (options.screen_order >= 0) rec.diagnostics.screen = check_completely_monotone(g, options.screen_order);
    rec.diagnostics.fit_degree = contour.fit_degree;
    rec.diagnostics.cdf_repair = contour.cdf_repair;
    rec.diagnostics.clipped_mass = contour.clipped_mass;
    rec.diagnostics.talbot_nodes = contour.talbot_nodes;
    rec.diagnostics.contour_failure = failure;
    if (rec.diagnostics.transform_residual > options.refit_limit)
        throw CalibrationError("contour inversion failed (" + failure + ") and the least-squares fit leaves residual " +
                               std::to_string(rec.diagnostics.transform_residual));
    return rec;
}

MgpDescriptor calibrate_mgd(const std::vector<RiskNeutralSlice>& slices, const ForwardCurve& curve,
                            const CalibrationOptions& options, CalibrationDiagnostics* diagnostics) {
    require(!slices.empty(), "calibrate_mgd: no slices");
    require(options.quantiles >= 2, "calibrate_mgd: need at least two quantiles");
    for (std::size_t k = 0; k < slices.size(); ++k) {
        require(slices[k].maturity > (k == 0 ? curve.t0 : slices[k - 1].maturity),
                "calibrate_mgd: slice maturities must be strictly increasing after t0");
        const double f = curve.forward(slices[k].maturity);
        require(std::abs(slices[k].forward / f - 1.0) <= 1e-6,
                "calibrate_mgd: slice forward disagrees with the forward curve at T=" +
                    std::to_string(slices[k].maturity));
    }
    CalibrationDiagnostics diag;
    const std::size_t q = options.quantiles;
    std::vector<std::vector<double>> v(q, std::vector<double>(slices.size()));
    for (std::size_t k = 0; k < slices.size(); ++k) {
        const LogMoneynessDensity e = to_log_moneyness(slices[k]);
        const TransformProfile g = build_G(e, default_eta_grid(e, 1.0, options.eta_points), 1.0);
        const std::vector<double> theta = default_theta_grid(e, 1.0, options.theta_cells);
        RecoveredMixing rec;
        try {
            rec = recover_mixing(g, theta, options.inversion);
        } catch (const CalibrationError& err) {
            throw CalibrationError("calibrate_mgd: maturity " + std::to_string(slices[k].maturity) + ": " + err.what());
        }
        // Least-squares laws concentrated on a few cells are refitted on a
        // grid spanning only their support, which shrinks the cell width.
        for (std::size_t pass = 0; pass < options.refine_passes && rec.diagnostics.refit; ++pass) {
            std::size_t first = 0, last = rec.cdf.size() - 1;
            while (first + 1 < rec.cdf.size() && rec.cdf[first + 1] <= 1e-10) ++first;
            while (last > 0 && rec.cdf[last - 1] >= 1.0 - 1e-10) --last;
            const std::size_t margin = 4;
            const double lo = rec.theta[first > margin ? first - margin : 0];
            const double hi = rec.theta[std::min(last + margin, rec.theta.size() - 1)];
            if (!(hi - lo < 0.25 * (rec.theta.back() - rec.theta.front()))) break;
            std::vector<double> zoom(options.theta_cells + 1);
            for (std::size_t i = 0; i <= options.theta_cells; ++i)
                zoom[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(options.theta_cells);
            RecoveredMixing finer = fit_transform_masses(g, zoom);
            if (!(finer.diagnostics.transform_residual <= 2.0 * rec.diagnostics.transform_residual)) break;
            finer.diagnostics.screen = rec.diagnostics.screen;
            finer.diagnostics.fit_degree = rec.diagnostics.fit_degree;
            finer.diagnostics.cdf_repair = rec.diagnostics.cdf_repair;
            finer.diagnostics.clipped_mass = rec.diagnostics.clipped_mass;
            finer.diagnostics.talbot_nodes = rec.diagnostics.talbot_nodes;
            finer.diagnostics.contour_failure = rec.diagnostics.contour_failure;
            finer.diagnostics.support_refinements = rec.diagnostics.support_refinements + 1;
            rec = std::move(finer);
        }
        diag.per_maturity.push_back(rec.diagnostics);
        // Band means of the quantile function keep the mean and the tail of each law.
        for (std::size_t i = 0; i < q; ++i)
            v[i][k] = band_mean(rec.theta, rec.cdf, static_cast<double>(i) / q, static_cast<double>(i + 1) / q);
    }
    MgpDescriptor desc;
    desc.mixing = MixingLaw::uniform(q);
    desc.t0 = curve.t0;
    desc.x0 = curve.x0;
    desc.rates = curve.rates;
    desc.theta_lo = 0.0;
    desc.theta_hi = 1.0;
    for (const auto& s : slices) desc.maturities.push_back(s.maturity);
    // Calendar repair is judged per maturity in aggregate: quantiles sitting
    // on a steep stretch of a recovered CDF can swap places between
    // maturities without any real arbitrage.
    std::vector<double> moved(slices.size(), 0.0), level(slices.size(), 0.0);
    for (std::size_t i = 0; i < q; ++i) {
        const std::vector<double> fixed = isotonic_increasing(v[i]);
        std::vector<double> inc(slices.size());
        for (std::size_t k = 0; k < slices.size(); ++k) {
            const double change = std::abs(fixed[k] - v[i][k]);
            if (change > 0.0) ++diag.calendar_violations;
            diag.calendar_max_pointwise = std::max(diag.calendar_max_pointwise, change);
            moved[k] += change;
            level[k] += v[i][k];
            inc[k] = std::max(fixed[k] - (k == 0 ? 0.0 : fixed[k - 1]), 0.0);
        }
        desc.increments.push_back(inc);
    }
    for (std::size_t k = 0; k < slices.size(); ++k)
        if (level[k] > 0.0) diag.calendar_max_relative = std::max(diag.calendar_max_relative, moved[k] / level[k]);
    if (diagnostics) *diagnostics = diag;
    if (diag.calendar_max_relative > options.calendar_limit)
        throw CalibrationError("calibrate_mgd: calendar arbitrage, quantile total variance repair of " +
                               std::to_string(diag.calendar_max_relative) + " relative");
    desc.validate();
    return desc;
}

} // namespace mixvol
