// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "mixvol/black_scholes.hpp"
#include "mixvol/errors.hpp"
#include "mixvol/hierarchical.hpp"
#include "mixvol/laplace.hpp"
#include "mixvol/market.hpp"
#include "mixvol/mc_engine.hpp"
#include "mixvol/mgp.hpp"
#include "mixvol/projection.hpp"
#include "mixvol/recovery.hpp"
#include "mixvol/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

using namespace mixvol;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

MgpDescriptor atom_desc(std::vector<double> v, std::vector<double> w, double t = 1.0, double x0 = 100.0) {
    return variance_mixture_descriptor(MixingLaw::atoms(std::move(v), std::move(w)), t, x0);
}

double gamma2_cdf(double x, double beta) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x / beta) * (1.0 + x / beta); }

/// Gamma(shape, beta) CDF for integer shape.
double gamma_cdf(double x, int shape, double beta) {
    if (x <= 0.0) return 0.0;
    const double z = x / beta;
    double term = 1.0, sum = 1.0;
    for (int j = 1; j < shape; ++j) {
        term *= z / j;
        sum += term;
    }
    return 1.0 - std::exp(-z) * sum;
}

/// Fine cell law of a Gamma(shape, beta) variable.
MixingLaw gamma_law(int shape, double beta, std::size_t cells = 4000) {
    const double hi = beta * (shape + 40.0);
    std::vector<double> edges(cells + 1), masses(cells);
    for (std::size_t i = 0; i <= cells; ++i) edges[i] = hi * static_cast<double>(i) / cells;
    for (std::size_t i = 0; i < cells; ++i) masses[i] = gamma_cdf(edges[i + 1], shape, beta) - gamma_cdf(edges[i], shape, beta);
    return MixingLaw::grid_from_masses(edges, masses);
}

/// Law of X(t1) / X(t0) when the total variance accrued over [t0, t1] has the given law, r = 0.
RiskNeutralSlice ratio_slice(const MixingLaw& increments, double t0, double t1) {
    MgpDescriptor r = variance_mixture_descriptor(increments, t1, 1.0);
    r.t0 = t0;
    return mixture_slice(r, t1);
}

std::vector<double> uniform_theta(double hi, std::size_t cells) {
    std::vector<double> theta(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) theta[i] = hi * i / cells;
    return theta;
}

RecoveredMixing recover_from_slice(const MgpDescriptor& d, const std::vector<double>& theta, double span_sd,
                                   const InversionOptions& o) {
    const LogMoneynessDensity e = to_log_moneyness(mixture_slice(d, 1.0, 512, span_sd));
    return recover_mixing(build_G(e, 1.0), theta, o);
}

Outcome ac1() {
    const MgpDescriptor d = atom_desc({0.01, 0.09}, {0.5, 0.5});
    const double want = 0.5 * black_price(OptionKind::call, 100.0, 100.0, 0.01, 1.0) +
                        0.5 * black_price(OptionKind::call, 100.0, 100.0, 0.09, 1.0);
    const double analytic = price_european(d, {OptionKind::call, 100.0, 1.0});
    const MeanEstimate mc = price_mc(simulate_mgd(d, {0.0, 1.0}, 100000, 20240601),
                                     PayoffSpec::european(OptionKind::call, 100.0, 1.0));
    const double gap = std::abs(analytic - want);
    const double z = std::abs(mc.mean - analytic) / mc.std_error;
    return {gap < 1e-10 && z < 3.0,
            fmt("analytic %.10f vs weighted Black %.10f (gap %.1e); MC %.4f +- %.4f (%.2f SE)", analytic, want, gap,
                mc.mean, mc.std_error, z)};
}

Outcome ac2() {
    InversionOptions o;
    o.talbot_nodes = 32;
    const double beta = 0.02;
    const MgpDescriptor g = variance_mixture_descriptor(gamma_law(2, beta), 1.0, 100.0);
    const LogMoneynessDensity e = to_log_moneyness(mixture_slice(g, 1.0));
    const RecoveredMixing r = recover_mixing(build_G(e, 1.0), default_theta_grid(e, 1.0, 512), o);
    double linf = 0.0;
    for (double th = 0.0; th <= r.theta.back(); th += r.theta.back() / 4000.0)
        linf = std::max(linf, std::abs(r.cdf_at(th) - gamma2_cdf(th, beta)));

    // Atoms: the CDF must cross each mass level within one cell of the atom.
    const std::vector<double> theta = uniform_theta(0.2, 128);
    const double cell = theta[1];
    const auto crossing = [&](const RecoveredMixing& m, double level) {
        for (std::size_t i = 1; i < m.theta.size(); ++i)
            if (m.cdf[i] >= level) return m.theta[i - 1] + (level - m.cdf[i - 1]) / (m.cdf[i] - m.cdf[i - 1]) * cell;
        return m.theta.back();
    };
    const RecoveredMixing dirac = recover_from_slice(atom_desc({0.05}, {1.0}), theta, 12.0, o);
    const RecoveredMixing two = recover_from_slice(atom_desc({0.01, 0.09}, {0.5, 0.5}), theta, 12.0, o);
    const double e_dirac = std::abs(crossing(dirac, 0.5) - 0.05) / cell;
    const double e_lo = std::abs(crossing(two, 0.25) - 0.01) / cell;
    const double e_hi = std::abs(crossing(two, 0.75) - 0.09) / cell;
    const double plateau = std::abs(two.cdf_at(0.05) - 0.5);
    const bool pass = linf < 1e-3 && e_dirac <= 1.0 && e_lo <= 1.0 && e_hi <= 1.0 && plateau < 1e-3;
    return {pass, fmt("Gamma CDF Linf %.2e (%s); atom offsets in cells: Dirac %.2f, two-atom %.2f / %.2f, "
                      "plateau %.1e",
                      linf, r.diagnostics.method.c_str(), e_dirac, e_lo, e_hi, plateau)};
}

Outcome ac3() {
    MgpDescriptor d;
    d.mixing = MixingLaw::atoms({0.1, 0.3}, {0.5, 0.5});
    d.maturities = {0.5, 1.0};
    d.x0 = 100.0;
    d.increments = {{0.01 * 0.5, 0.01 * 0.5}, {0.09 * 0.5, 0.09 * 0.5}};
    d.validate();
    const MgpDescriptor fit = calibrate_mgd({mixture_slice(d, 0.5), mixture_slice(d, 1.0)}, d.curve());
    double worst = 0.0, at_k = 0.0, at_t = 0.0;
    for (double t : {0.5, 1.0})
        for (double k = 70.0; k <= 150.0 + 1e-9; k += 5.0) {
            const OptionKind kind = k < 100.0 ? OptionKind::put : OptionKind::call;
            const double want = price_european(d, {kind, k, t});
            const double got = price_european(fit, {kind, k, t});
            const double rel = std::abs(got / want - 1.0);
            if (rel > worst) worst = rel, at_k = k, at_t = t;
        }
    return {worst < 1e-3, fmt("worst relative price error %.2e at K=%g T=%g over 34 options", worst, at_k, at_t)};
}

Outcome ac4() {
    const MgpDescriptor d = atom_desc({0.01, 0.09}, {0.5, 0.5});
    std::vector<double> t;
    for (int i = 0; i <= 20; ++i) t.push_back(i / 20.0);
    const LocalVolSurface s = project(d, default_projection_x(d, 200), t);
    VerifyProjectionOptions o;
    o.times = {0.5, 1.0};
    const ProjectionReport ok = verify_projection(d, s, 100000, 31, o);
    o.variance_scale = 1.2;
    const ProjectionReport bad = verify_projection(d, s, 100000, 31, o);
    return {ok.max_statistic < 0.01 && bad.max_statistic > 0.02,
            fmt("KS %.4f (t=0.5) %.4f (t=1), escaped %.1e; +20%% variance control KS %.4f", ok.checks[0].ks.statistic,
                ok.checks[1].ks.statistic, ok.escaped_fraction, bad.max_statistic)};
}

Outcome ac5() {
    double worst = 0.0;
    for (double t : {0.25, 1.0})
        for (double m : {-0.4, -0.1, 0.0, 0.15, 0.5}) {
            const double base = implied_vol(atom_desc({0.01 * t, 0.09 * t}, {0.3, 0.7}, t), {OptionKind::call, 100.0 * std::exp(m), t});
            for (double c : {0.5, 2.0}) {
                const MgpDescriptor s = atom_desc({0.01 * t, 0.09 * t}, {0.3, 0.7}, t, 100.0 * c);
                worst = std::max(worst, std::abs(implied_vol(s, {OptionKind::call, 100.0 * c * std::exp(m), t}) - base));
            }
        }
    return {worst < 1e-8, fmt("largest implied-vol change under spot scaling %.1e", worst)};
}

Outcome ac6() {
    // v1 ~ Gamma(2, 0.01) at T1 = 0.5, independent Gamma(2, 0.01) increment, so v2 ~ Gamma(4, 0.01).
    const std::vector<RiskNeutralSlice> spot{mixture_slice(variance_mixture_descriptor(gamma_law(2, 0.01), 0.5, 100.0), 0.5),
                                             mixture_slice(variance_mixture_descriptor(gamma_law(4, 0.01), 1.0, 100.0), 1.0)};
    const std::vector<RiskNeutralSlice> ratios{ratio_slice(gamma_law(2, 0.01), 0.5, 1.0)};
    const HierarchicalModel m = build_hierarchical(spot, ratios, ForwardCurve{0.0, 100.0, {}});
    const VerificationReport r = verify_model(m, 100000, 53);
    std::string detail;
    for (const auto& c : r.checks) detail += fmt("%s KS %.4f; ", c.name.c_str(), c.statistic);
    detail += fmt("coupling residual %.1e", m.couplings[1].max_residual());
    return {r.pass && r.checks.size() == 3, detail};
}

Outcome ac7() {
    const CirParams p{2.0, 0.04, 0.3, 0.04};
    const HestonVarianceSample fit = heston_variance_law(p, {0.5, 1.0}, {100000, 500.0, 101, 0});
    const HestonVarianceSample oracle = heston_variance_law(p, {0.5, 1.0}, {100000, 500.0, 202, 0});
    const HierarchicalModel m = empirical_model(fit, 100.0);
    VerifyOptions o;
    o.ks_limit = 0.015;
    const VerificationReport r = compare_to_heston(m, oracle, 100000, 303, o);
    std::string detail;
    for (const auto& c : r.checks) detail += fmt("%s KS %.4f; ", c.name.c_str(), c.statistic);
    detail += fmt("truncated steps %.2f%%", 100.0 * fit.truncation_rate);
    return {r.pass && r.checks.size() == 3, detail};
}

Outcome ac8() {
    MgpDescriptor d;
    d.mixing = MixingLaw::atoms({0.1, 0.3}, {0.5, 0.5});
    d.maturities = {1.0, 2.0};
    d.x0 = 100.0;
    d.increments = {{0.01, 0.01}, {0.09, 0.09}};
    d.validate();
    const double x1 = 100.0 * std::exp(-0.15);

    // Two-term Bayes with the lognormal likelihoods written out.
    const auto lik = [&](double v) {
        const double y = std::log(x1 / 100.0);
        return std::exp(-0.5 * (y + 0.5 * v) * (y + 0.5 * v) / v) / std::sqrt(2.0 * std::numbers::pi * v);
    };
    const double oracle_hi = lik(0.09) / (lik(0.01) + lik(0.09));
    const MixingLaw post = posterior_mixing(d, 1.0, x1);
    const double sum = post.weight(0) + post.weight(1);

    const double strike = x1;
    const double restart = price_european(restart_descriptor(d, 1.0, x1), {OptionKind::call, strike, 2.0});
    const PathBatch b = simulate_mgd(d, {0.0, 1.0, 2.0}, 2000000, 77);
    std::vector<double> pay;
    for (std::size_t p = 0; p < b.paths; ++p) {
        const double y = std::log(b.value(p, 1) / x1);
        if (std::abs(y) < 0.005) pay.push_back(std::max(x1 * b.value(p, 2) / b.value(p, 1) - strike, 0.0));
    }
    const MeanEstimate mc = mean_and_error(pay);
    const double z = std::abs(mc.mean - restart) / mc.std_error;
    const bool pass = z < 3.0 && std::abs(sum - 1.0) <= 1e-15 && std::abs(post.weight(1) - oracle_hi) < 1e-12;
    return {pass, fmt("posterior high-vol weight %.6f (Bayes %.6f), weights sum - 1 = %.1e; restart price %.4f vs "
                      "bucket MC %.4f +- %.4f (%.2f SE, %zu paths)",
                      post.weight(1), oracle_hi, sum - 1.0, restart, mc.mean, mc.std_error, z, pay.size())};
}

Outcome ac9() {
    double worst = 0.0;
    std::string where;
    for (double t : {0.5, 1.5})
        for (double k : {80.0, 90.0, 100.0, 110.0, 120.0}) {
            const auto make = [&](double x0, double bump_lo, double bump_hi) {
                MgpDescriptor d;
                d.mixing = MixingLaw::atoms({0.0, 1.0}, {0.4, 0.6});
                d.maturities = {t};
                d.x0 = x0;
                d.rates = RateCurve::flat(0.03);
                d.increments = {{std::pow(0.15 + bump_lo, 2) * t}, {std::pow(0.35 + bump_hi, 2) * t}};
                return d;
            };
            const EuropeanSpec s{OptionKind::call, k, t};
            const Greeks g = greeks(make(100.0, 0.0, 0.0), s);
            const double hx = 1e-2, hv = 1e-5;
            const auto p = [&](double x0, double a, double b) { return price_european(make(x0, a, b), s); };
            const double delta = (p(100.0 + hx, 0, 0) - p(100.0 - hx, 0, 0)) / (2.0 * hx);
            const double gamma = (p(100.0 + hx, 0, 0) - 2.0 * p(100.0, 0, 0) + p(100.0 - hx, 0, 0)) / (hx * hx);
            const double vlo = (p(100.0, hv, 0) - p(100.0, -hv, 0)) / (2.0 * hv);
            const double vhi = (p(100.0, 0, hv) - p(100.0, 0, -hv)) / (2.0 * hv);
            for (auto [name, a, b] : {std::tuple{"delta", g.delta, delta}, std::tuple{"gamma", g.gamma, gamma},
                                      std::tuple{"vega lo", g.vega[0], vlo}, std::tuple{"vega hi", g.vega[1], vhi}}) {
                const double rel = std::abs(a / b - 1.0);
                if (rel > worst) worst = rel, where = fmt("%s K=%g T=%g", name, k, t);
            }
        }
    return {worst < 1e-4, fmt("worst relative error %.1e (%s) over delta, gamma, vegas on 5 strikes x 2 maturities",
                              worst, where.c_str())};
}

Outcome ac10() {
    // Point mass at nu = 0.09: exp(C0 * 0.09) with C0 = 20.
    const StrongSolutionReport point = check_strong_solution(atom_desc({0.09}, {1.0}), 1.0);
    // Compact support: rates on [0.01, 0.09] carried by cells.
    const std::size_t cells = 64;
    std::vector<double> edges(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) edges[i] = 0.01 + 0.08 * i / cells;
    const MgpDescriptor compact = variance_mixture_descriptor(MixingLaw::grid(edges, std::vector<double>(cells, 1.0 / 0.08)), 1.0);
    const StrongSolutionReport comp = check_strong_solution(compact, 1.0);
    double direct = 0.0;
    for (std::size_t i = 0; i < cells; ++i) direct += compact.mixing.weight(i) * std::exp(20.0 * compact.mixing.point(i));

    // f^2 = nu on an unbounded set; densities exp(-a nu) diverge iff a <= C0.
    const auto tail = [](double a) {
        const std::size_t n = 400;
        std::vector<double> e(n + 1), dens(n);
        for (std::size_t i = 0; i <= n; ++i) e[i] = 3.0 * i / n;
        for (std::size_t i = 0; i < n; ++i) dens[i] = std::exp(-a * 0.5 * (e[i] + e[i + 1]));
        std::vector<double> masses(n);
        for (std::size_t i = 0; i < n; ++i) masses[i] = dens[i] * (e[i + 1] - e[i]);
        MgpDescriptor d = variance_mixture_descriptor(MixingLaw::grid_from_masses(e, masses), 1.0);
        d.theta_hi = std::numeric_limits<double>::infinity();
        return check_strong_solution(d, 1.0);
    };
    const StrongSolutionReport heavy = tail(5.0), light = tail(60.0);
    const bool pass = point.finite && std::abs(point.value - std::exp(1.8)) < 1e-12 && comp.finite &&
                      std::abs(comp.value / direct - 1.0) < 1e-12 && !heavy.finite && light.finite;
    return {pass, fmt("point mass %.6f (exp(1.8) = %.6f), compact grid %.6f vs direct %.6f; tail exp(-5 nu): %s "
                      "(rate %.2f), exp(-60 nu): %s",
                      point.value, std::exp(1.8), comp.value, direct, heavy.finite ? "finite" : "divergent",
                      heavy.tail_rate, light.finite ? "finite" : "divergent")};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"AC1 weighted Black pricing identity", ac1},   {"AC2 mixing-law round trip", ac2},
        {"AC3 calibration reprices Europeans", ac3},    {"AC4 Markovian projection", ac4},
        {"AC5 sticky delta", ac5},                      {"AC6 hierarchical build", ac6},
        {"AC7 Heston match", ac7},                      {"AC8 conditional law", ac8},
        {"AC9 Greeks identity", ac9},                   {"AC10 admissibility check", ac10},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failed;
        std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
