#include "selftest.hpp"

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

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace mixvol::cli {

namespace {

struct Case {
    std::string name;
    std::function<bool(std::string&)> run;
};

MgpDescriptor atom_desc(std::vector<double> v, std::vector<double> w, double t = 1.0) {
    return variance_mixture_descriptor(MixingLaw::atoms(std::move(v), std::move(w)), t, 100.0);
}

RiskNeutralSlice lognormal(double v, double t = 1.0) { return mixture_slice(atom_desc({v}, {1.0}, t), t); }

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

template <class E, class F>
bool throws(F&& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    }
    return false;
}

std::vector<double> log_eta(double lo, double hi, std::size_t n) {
    std::vector<double> eta{0.0};
    for (std::size_t i = 0; i < n; ++i) eta.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return eta;
}

HierarchicalModel two_layer_product() {
    // Layer 2 increments independent of layer 1.
    HierarchicalModel m = flat_model(0.2, {0.5, 1.0}, 100.0, {}, 16);
    const std::size_t n = m.n;
    const std::vector<double> first{0.0, 0.3, 0.4, 0.3}, inc{0.0, 0.5, 0.5};
    m.couplings[0].mass.assign(n * n, 0.0);
    m.couplings[1].mass.assign(n * n, 0.0);
    for (std::size_t i = 0; i < first.size(); ++i) {
        m.couplings[0].mass[i] = first[i];
        for (std::size_t d = 0; d < inc.size(); ++d) m.couplings[1].mass[i * n + i + d] = first[i] * inc[d];
    }
    m.spot_targets.clear();
    m.ratio_targets.clear();
    return m;
}

std::vector<Case> cases() {
    std::vector<Case> c;
    c.push_back({"forward with zero rate", [](std::string&) {
                     return forward(ForwardCurve{0.0, 100.0, RateCurve::flat(0.0)}, 1.0) == 100.0;
                 }});
    c.push_back({"lognormal slice maps to normal log-moneyness", [](std::string& why) {
                     const LogMoneynessDensity e = to_log_moneyness(lognormal(0.04));
                     std::vector<double> m1(e.y.size()), m2(e.y.size());
                     for (std::size_t i = 0; i < e.y.size(); ++i) {
                         m1[i] = e.y[i] * e.pdf[i];
                         m2[i] = (e.y[i] + 0.02) * (e.y[i] + 0.02) * e.pdf[i];
                     }
                     const double mean = trapezoid(e.y, m1), var = trapezoid(e.y, m2);
                     why = "mean " + num(mean) + ", variance " + num(var);
                     return close(mean, -0.02, 1e-6) && close(var, 0.04, 1e-6);
                 }});
    c.push_back({"log-moneyness mass is one", [](std::string& why) {
                     const LogMoneynessDensity e = to_log_moneyness(mixture_slice(atom_desc({0.01, 0.09}, {0.5, 0.5}), 1.0));
                     const double mass = trapezoid(e.y, e.pdf);
                     why = "mass " + num(mass - 1.0);
                     return close(mass, 1.0, 1e-8);
                 }});
    c.push_back({"three strikes rejected", [](std::string&) {
                     return throws<InputError>([] { chain_to_density(black_chain(100.0, 1.0, 0.2, {90, 100, 110})); });
                 }});
    c.push_back({"zero variance is degenerate", [](std::string&) {
                     return component_density(atom_desc({0.0}, {1.0}), 0, 100.0, 1.0).degenerate;
                 }});
    c.push_back({"single-atom mixture density", [](std::string&) {
                     const MgpDescriptor d = atom_desc({0.04}, {1.0});
                     return mixture_density(d, 95.0, 1.0) == component_density(d, 0, 95.0, 1.0).value;
                 }});
    c.push_back({"mixture density mass", [](std::string& why) {
                     const RiskNeutralSlice s = mixture_slice(atom_desc({0.01, 0.09}, {0.5, 0.5}), 1.0);
                     const double mass = slice_mass(s);
                     why = "mass " + num(mass - 1.0);
                     return close(mass, 1.0, 1e-6);
                 }});
    c.push_back({"single atom prices as Black-Scholes", [](std::string&) {
                     const double p = price_european(atom_desc({0.04}, {1.0}), {OptionKind::call, 105.0, 1.0});
                     return close(p, black_price(OptionKind::call, 100.0, 105.0, 0.04, 1.0), 1e-12);
                 }});
    c.push_back({"put-call parity", [](std::string& why) {
                     MgpDescriptor d = atom_desc({0.01, 0.09}, {0.5, 0.5});
                     d.rates = RateCurve::flat(0.03);
                     const double call = price_european(d, {OptionKind::call, 110.0, 1.0});
                     const double put = price_european(d, {OptionKind::put, 110.0, 1.0});
                     const double gap = call - put - d.discount(1.0) * (d.forward(1.0) - 110.0);
                     why = "gap " + num(gap);
                     return std::abs(gap) < 1e-12;
                 }});
    c.push_back({"two-atom delta is the average", [](std::string&) {
                     const EuropeanSpec s{OptionKind::call, 100.0, 1.0};
                     const double lo = greeks(atom_desc({0.01}, {1.0}), s).delta;
                     const double hi = greeks(atom_desc({0.09}, {1.0}), s).delta;
                     return close(greeks(atom_desc({0.01, 0.09}, {0.5, 0.5}), s).delta, 0.5 * (lo + hi), 1e-14);
                 }});
    c.push_back({"identity re-parametrization", [](std::string&) {
                     const MgpDescriptor a = atom_desc({0.01, 0.09}, {0.5, 0.5});
                     return check_equivalence(a, reparametrize_equivalent(a, a.mixing)).equivalent;
                 }});
    c.push_back({"uniform target substitutes the quantile", [](std::string&) {
                     const MgpDescriptor a = atom_desc({0.01, 0.09}, {0.5, 0.5});
                     const MgpDescriptor b = reparametrize_equivalent(a, MixingLaw::uniform(64));
                     bool ok = check_equivalence(a, b).equivalent;
                     for (std::size_t i = 0; i < b.mixing.size(); ++i) {
                         const double u = b.mixing.point(i);
                         ok = ok && close(b.total_variance(i, 1.0), a.mixing.quantile(u), 1e-14);
                     }
                     return ok;
                 }});
    c.push_back({"unequal profiles are not equivalent", [](std::string&) {
                     const EquivalenceReport r =
                         check_equivalence(atom_desc({0.01, 0.09}, {0.5, 0.5}), atom_desc({0.01, 0.16}, {0.5, 0.5}));
                     return !r.equivalent && r.at_quantile > 0.5;
                 }});
    c.push_back({"single atom admissibility is finite", [](std::string&) {
                     return check_strong_solution(atom_desc({0.09}, {1.0}), 1.0).finite;
                 }});
    c.push_back({"Gaussian characteristic function", [](std::string& why) {
                     const cplx v = char_function(to_log_moneyness(lognormal(0.04)), cplx(1.0, 0.0));
                     const cplx want = std::exp(-cplx(1.0, 1.0) * 0.02);
                     why = "error " + num(std::abs(v - want));
                     return std::abs(v - want) < 1e-8;
                 }});
    c.push_back({"characteristic function at zero", [](std::string&) {
                     return std::abs(char_function(to_log_moneyness(lognormal(0.09)), cplx(0.0)) - 1.0) < 1e-8;
                 }});
    c.push_back({"single lognormal transform is exponential", [](std::string& why) {
                     const double theta0 = 0.06;
                     const TransformProfile g = build_G(to_log_moneyness(lognormal(theta0 * 2.0, 2.0)), log_eta(0.1, 50.0, 40), 2.0);
                     double worst = 0.0;
                     for (std::size_t i = 0; i < g.eta.size(); ++i)
                         worst = std::max(worst, std::abs(g.g[i] - std::exp(-g.eta[i] * theta0)));
                     why = "max error " + num(worst);
                     return worst < 1e-8;
                 }});
    c.push_back({"transform at zero is one", [](std::string&) {
                     const TransformProfile g = build_G(to_log_moneyness(mixture_slice(atom_desc({0.01, 0.09}, {0.5, 0.5}), 1.0)), 1.0);
                     return close(g.g.front(), 1.0, 1e-8) && g.eta.front() == 0.0;
                 }});
    c.push_back({"exponential is completely monotone", [](std::string&) {
                     return check_completely_monotone(profile_from_function([](double e) { return std::exp(-e); }, log_eta(0.01, 20.0, 200)), 6).pass;
                 }});
    c.push_back({"cosine fails the screen", [](std::string&) {
                     const MonotoneReport r =
                         check_completely_monotone(profile_from_function([](double e) { return std::cos(e); }, log_eta(0.01, 20.0, 200)), 4);
                     return !r.pass && (r.order == 0 || r.order == 2 || r.order == 1);
                 }});
    c.push_back({"Dirac transform recovers a step", [](std::string& why) {
                     const double theta0 = 0.0503, hi = 0.2;
                     const std::size_t cells = 128;
                     std::vector<double> theta(cells + 1);
                     for (std::size_t i = 0; i <= cells; ++i) theta[i] = hi * i / cells;
                     const RecoveredMixing r =
                         recover_mixing(profile_from_function([&](double e) { return std::exp(-e * theta0); }, log_eta(0.1, 4000.0, 300)), theta);
                     const double h = hi / cells;
                     const double below = r.cdf_at(theta0 - 2.0 * h), above = r.cdf_at(theta0 + 2.0 * h);
                     why = "CDF " + num(below) + " two cells below, " + num(above) + " two cells above";
                     return below < 1e-3 && above > 1.0 - 1e-3;
                 }});
    c.push_back({"flat smile calibrates to one vol", [](std::string& why) {
                     const MgpDescriptor d = calibrate_mgd({lognormal(0.04)}, ForwardCurve{0.0, 100.0, {}});
                     double lo = 1e300, hi = 0.0;
                     for (std::size_t i = 0; i < d.mixing.size(); ++i) {
                         lo = std::min(lo, d.total_variance(i, 1.0));
                         hi = std::max(hi, d.total_variance(i, 1.0));
                     }
                     const double p = price_european(d, {OptionKind::call, 100.0, 1.0});
                     const double want = black_price(OptionKind::call, 100.0, 100.0, 0.04, 1.0);
                     why = "quantile variances in [" + num(lo) + ", " + num(hi) + "], ATM price error " + num(p / want - 1.0);
                     return hi - lo < 0.04 * 0.1 && std::abs(p / want - 1.0) < 1e-3;
                 }});
    c.push_back({"single-atom projection is constant", [](std::string&) {
                     const MgpDescriptor d = atom_desc({0.04}, {1.0});
                     const LocalVolSurface s = project(d, default_projection_x(d, 40), {0.0, 0.5, 1.0});
                     bool ok = true;
                     for (double v : s.variance) ok = ok && close(v, 0.04, 1e-15);
                     return ok;
                 }});
    c.push_back({"projection stays within component variances", [](std::string&) {
                     const MgpDescriptor d = atom_desc({0.01, 0.09}, {0.5, 0.5});
                     const LocalVolSurface s = project(d, default_projection_x(d, 80), {0.0, 0.25, 0.5, 1.0});
                     bool ok = true;
                     for (double v : s.variance) ok = ok && v >= 0.01 - 1e-15 && v <= 0.09 + 1e-15;
                     return ok;
                 }});
    c.push_back({"flat world variance marginals are Dirac", [](std::string& why) {
                     const RiskNeutralSlice s1 = lognormal(0.02, 0.5), s2 = lognormal(0.04, 1.0);
                     MgpDescriptor r = atom_desc({0.02}, {1.0}, 1.0);
                     r.t0 = 0.5;
                     r.x0 = 1.0;
                     r.maturities = {1.0};
                     const RiskNeutralSlice ratio = mixture_slice(r, 1.0);
                     const auto m = recover_variance_marginals({s1, s2}, {ratio});
                     const auto near = [&](const std::vector<double>& mass, double at) {
                         double inside = 0.0;
                         for (std::size_t i = 0; i < mass.size(); ++i)
                             if (std::abs(i * m[0].h - at) <= 1.0001 * m[0].h) inside += mass[i];
                         return inside;
                     };
                     const double a = near(m[0].total, 0.02), b = near(m[1].total, 0.04), d = near(m[1].increment, 0.02);
                     why = "mass within one cell " + num(a) + ", " + num(b) + ", " + num(d);
                     return a > 1.0 - 1e-6 && b > 1.0 - 1e-6 && d > 1.0 - 1e-6;
                 }});
    c.push_back({"dominance violation names the layer", [](std::string& why) {
                     MgpDescriptor r = atom_desc({0.01}, {1.0}, 1.0);
                     r.t0 = 0.5;
                     r.x0 = 1.0;
                     try {
                         recover_variance_marginals({lognormal(0.08, 0.5), lognormal(0.02, 1.0)}, {mixture_slice(r, 1.0)});
                     } catch (const InputError& e) {
                         why = e.what();
                         return why.find("layer 2") != std::string::npos;
                     }
                     return false;
                 }});
    c.push_back({"Dirac coupling", [](std::string&) {
                     std::vector<double> a(8, 0.0), b(8, 0.0), n(8, 0.0);
                     a[2] = b[3] = n[5] = 1.0;
                     const VarianceCoupling f = couple_marginals(a, n, b, 0.01);
                     std::vector<double> bad(8, 0.0);
                     bad[6] = 1.0;
                     return close(f.at(2, 5), 1.0, 1e-12) && throws<CalibrationError>([&] { couple_marginals(a, bad, b, 0.01); });
                 }});
    c.push_back({"product coupling gives the increment law", [](std::string&) {
                     const HierarchicalModel m = two_layer_product();
                     bool ok = true;
                     for (std::size_t row = 1; row <= 3; ++row) {
                         const ConditionalLaw l = conditional_cdf(m, 2, row * m.h);
                         ok = ok && close(l.cdf[0], 0.0, 1e-15) && close(l.cdf[1], 0.5, 1e-15) && close(l.cdf[2], 1.0, 1e-15);
                         for (std::size_t i = 1; i < l.cdf.size(); ++i) ok = ok && l.cdf[i] >= l.cdf[i - 1];
                     }
                     return ok;
                 }});
    c.push_back({"Dirac coupling gives a step", [](std::string&) {
                     const HierarchicalModel m = flat_model(0.2, {0.5, 1.0}, 100.0);
                     const ConditionalLaw l = conditional_cdf(m, 2, m.v0 + 0.02);
                     bool ok = !l.snapped;
                     for (std::size_t i = 0; i < l.cdf.size(); ++i)
                         ok = ok && (l.increments[i] < 0.02 - 1e-12 ? l.cdf[i] == 0.0 : l.cdf[i] == 1.0);
                     return ok;
                 }});
    c.push_back({"flat layers are single increments", [](std::string&) {
                     const HierarchicalModel m = flat_model(0.2, {0.5, 1.0}, 100.0);
                     const MgpDescriptor d = build_layer_parametrization(m, 2, 0.02);
                     return d.mixing.size() == 1 && close(d.mixing.point(0), 0.02, 1e-15) && d.t0 == 0.5 && d.x0 == 1.0;
                 }});
    c.push_back({"integrated variance is nondecreasing", [](std::string&) {
                     const HestonVarianceSample s = heston_variance_law({2.0, 0.04, 0.3, 0.04}, {0.5, 1.0}, {2000, 500.0, 3, 0});
                     bool ok = true;
                     for (std::size_t i = 0; i < s.samples; ++i) ok = ok && s.at(i, 0) >= 0.0 && s.at(i, 0) <= s.at(i, 1);
                     return ok;
                 }});
    c.push_back({"flat model passes verification", [](std::string& why) {
                     const HierarchicalModel m = flat_model(0.2, {0.5, 1.0}, 100.0);
                     VerifyOptions o;
                     o.ks_limit = 0.02;
                     const VerificationReport r = verify_model(m, 20000, 11, o);
                     double pmin = 1.0;
                     for (const auto& k : r.checks) pmin = std::min(pmin, k.p_value);
                     why = "smallest p-value " + num(pmin);
                     return r.pass && r.checks.size() == 3 && pmin > 1e-4;
                 }});
    c.push_back({"restart at the first layer is the identity", [](std::string&) {
                     const HierarchicalModel m = two_layer_product();
                     const HierarchicalModel r = conditional_restart(m, 1, m.x0, m.v0);
                     bool ok = r.maturities == m.maturities && r.x0 == m.x0 && r.v0 == m.v0;
                     for (std::size_t k = 0; k < m.couplings.size(); ++k)
                         for (std::size_t i = 0; i < m.n * m.n; ++i) ok = ok && close(r.couplings[k].mass[i], m.couplings[k].mass[i], 1e-15);
                     return ok;
                 }});
    c.push_back({"flat restart shortens the grid", [](std::string&) {
                     const HierarchicalModel m = flat_model(0.2, {0.5, 1.0}, 100.0);
                     const HierarchicalModel r = conditional_restart(m, 2, 90.0, 0.02);
                     const ConditionalLaw l = conditional_cdf(r, 1, r.v0);
                     return r.layers() == 1 && r.maturities.front() == 0.5 && r.x0 == 90.0 && close(r.v0, 0.02, 1e-15) &&
                            l.cdf[m.lattice_index(0.02)] == 1.0;
                 }});
    c.push_back({"zero-variance paths follow the forward", [](std::string&) {
                     MgpDescriptor d = atom_desc({0.0}, {1.0});
                     d.rates = RateCurve::flat(0.05);
                     const PathBatch b = simulate_mgd(d, {0.0, 0.5, 1.0}, 200, 5);
                     bool ok = true;
                     for (std::size_t p = 0; p < b.paths; ++p)
                         for (std::size_t j = 0; j < b.times.size(); ++j) ok = ok && close(b.value(p, j), d.forward(b.times[j]), 1e-12);
                     return ok;
                 }});
    c.push_back({"flat hierarchy equals the single atom", [](std::string&) {
                     const HierarchicalModel m = flat_model(0.2, {0.5, 1.0}, 100.0);
                     MgpDescriptor d = atom_desc({0.04}, {1.0});
                     d.maturities = {0.5, 1.0};
                     // The lattice carries the variances, so take them from it.
                     const double v1 = m.lattice_index(0.02) * m.h, v2 = m.lattice_index(0.04) * m.h;
                     d.increments = {{v1, v2 - v1}};
                     const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
                     return simulate_hier(m, grid, 500, 9).values == simulate_mgd(d, grid, 500, 9).values;
                 }});
    c.push_back({"total variance is nondecreasing along paths", [](std::string&) {
                     const HierarchicalModel m = two_layer_product();
                     const PathBatch b = simulate_hier(m, {0.5, 1.0}, 2000, 4);
                     bool ok = b.hidden_dim == 2;
                     for (std::size_t p = 0; p < b.paths; ++p) ok = ok && b.hidden_at(p, 0) <= b.hidden_at(p, 1);
                     return ok;
                 }});
    c.push_back({"zero-strike call prices the spot", [](std::string& why) {
                     MgpDescriptor d = atom_desc({0.01, 0.09}, {0.5, 0.5});
                     d.rates = RateCurve::flat(0.02);
                     const MeanEstimate e = price_mc(simulate_mgd(d, {0.0, 1.0}, 20000, 8), PayoffSpec::european(OptionKind::call, 0.0, 1.0));
                     why = "price " + num(e.mean) + " +- " + num(e.std_error);
                     return std::abs(e.mean - 100.0) <= 3.0 * e.std_error;
                 }});
    c.push_back({"single-atom posterior is unchanged", [](std::string&) {
                     const MixingLaw p = posterior_mixing(atom_desc({0.04}, {1.0}), 0.5, 80.0);
                     return p.size() == 1 && p.weight(0) == 1.0;
                 }});
    return c;
}

} // namespace

int run_selftest(std::ostream& out) {
    std::size_t failed = 0, total = 0;
    for (const Case& c : cases()) {
        ++total;
        std::string why;
        bool ok = false;
        try {
            ok = c.run(why);
        } catch (const std::exception& e) {
            why = std::string("threw: ") + e.what();
        }
        if (!ok) ++failed;
        out << (ok ? "PASS " : "FAIL ") << c.name;
        if (!ok && !why.empty()) out << " (" << why << ")";
        out << '\n';
    }
    out << total - failed << "/" << total << " selftest cases passed\n";
    return failed == 0 ? 0 : static_cast<int>(ErrorKind::verification);
}

} // namespace mixvol::cli
