#include "mixvol/errors.hpp"
#include "mixvol/recovery.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mixvol;

namespace {

LogMoneynessDensity lognormal_e(double v, double t = 1.0) {
    return to_log_moneyness(mixture_slice(oracle::atoms({v}, {1.0}, t), t));
}

std::vector<double> log_eta(double lo, double hi, std::size_t n) {
    std::vector<double> eta{0.0};
    for (std::size_t i = 0; i < n; ++i) eta.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return eta;
}

std::vector<double> uniform_theta(double hi, std::size_t cells) {
    std::vector<double> theta(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) theta[i] = hi * i / cells;
    return theta;
}

/// Level crossing of a recovered CDF, linear inside the cell.
double crossing(const RecoveredMixing& m, double level) {
    for (std::size_t i = 1; i < m.theta.size(); ++i)
        if (m.cdf[i] >= level)
            return m.theta[i - 1] + (level - m.cdf[i - 1]) / (m.cdf[i] - m.cdf[i - 1]) * (m.theta[i] - m.theta[i - 1]);
    return m.theta.back();
}

} // namespace

TEST(CharFunction, Gaussian) {
    const cplx v = char_function(lognormal_e(0.04), cplx(1.0, 0.0));
    EXPECT_LT(std::abs(v - std::exp(-cplx(1.0, 1.0) * 0.02)), 1e-8);
    EXPECT_NEAR(char_function(lognormal_e(0.04), cplx(0.0)).real(), 1.0, 1e-8);
}

TEST(CharFunction, MixtureIsLinear) {
    const LogMoneynessDensity e = to_log_moneyness(mixture_slice(oracle::atoms({0.01, 0.09}, {0.5, 0.5}), 1.0));
    for (double xi : {0.5, 2.0, 7.0}) {
        const auto gauss = [&](double v) { return std::exp(cplx(0.0, xi) * (-0.5 * v) - 0.5 * xi * xi * v); };
        EXPECT_LT(std::abs(char_function(e, cplx(xi, 0.0)) - (0.5 * gauss(0.01) + 0.5 * gauss(0.09))), 1e-8);
    }
}

TEST(CharFunction, TruncatedGridIsRejected) {
    const LogMoneynessDensity e = to_log_moneyness(mixture_slice(oracle::atoms({0.04}, {1.0}), 1.0, 512, 2.0));
    EXPECT_THROW(char_function(e, cplx(1.0, 0.0)), GridError);
}

TEST(BuildG, SingleLognormalIsExponential) {
    const double theta0 = 0.03, t = 2.0;
    const TransformProfile g = build_G(lognormal_e(theta0 * t, t), log_eta(0.1, 80.0, 50), t);
    for (std::size_t i = 0; i < g.eta.size(); ++i) EXPECT_NEAR(g.g[i], std::exp(-g.eta[i] * theta0), 1e-8);
}

TEST(BuildG, TwoAtomSum) {
    const TransformProfile g = build_G(to_log_moneyness(mixture_slice(oracle::atoms({0.01, 0.09}, {0.5, 0.5}), 1.0)),
                                       log_eta(0.1, 200.0, 60), 1.0);
    for (std::size_t i = 0; i < g.eta.size(); ++i)
        EXPECT_NEAR(g.g[i], 0.5 * std::exp(-0.01 * g.eta[i]) + 0.5 * std::exp(-0.09 * g.eta[i]), 1e-8);
    EXPECT_LT(g.imag_residue, 1e-8);
}

TEST(BuildG, DefaultGridStartsAtOne) {
    const TransformProfile g = build_G(lognormal_e(0.04), 1.0);
    EXPECT_EQ(g.eta.front(), 0.0);
    EXPECT_NEAR(g.g.front(), 1.0, 1e-12);
    for (std::size_t i = 1; i < g.g.size(); ++i) EXPECT_LE(g.g[i], g.g[i - 1] + 1e-8); // up to quadrature noise
}

TEST(BuildG, NonMixtureHasImaginaryResidue) {
    // A Gaussian centred at zero is not the log of any lognormal mixture.
    LogMoneynessDensity e;
    e.maturity = 1.0;
    for (int i = 0; i <= 800; ++i) {
        e.y.push_back(-1.6 + 3.2 * i / 800.0);
        e.pdf.push_back(oracle::normal_pdf(e.y.back(), 0.0, 0.04));
    }
    EXPECT_THROW(build_G(e, log_eta(1.0, 50.0, 20), 1.0), InputError);
}

TEST(MonotoneScreen, Cases) {
    EXPECT_TRUE(check_completely_monotone(profile_from_function([](double e) { return std::exp(-e); }, log_eta(0.01, 20, 200)), 6).pass);
    const MonotoneReport c = check_completely_monotone(profile_from_function([](double e) { return std::cos(e); }, log_eta(0.01, 20, 200)), 4);
    EXPECT_FALSE(c.pass);
    EXPECT_GT(c.eta, 0.0);
    EXPECT_TRUE(check_completely_monotone(
                    profile_from_function([](double e) { return 0.5 * std::exp(-0.01 * e) + 0.5 * std::exp(-0.09 * e); },
                                          log_eta(0.01, 2000, 300)),
                    4)
                    .pass);
}

TEST(Inversion, DiracIsAStep) {
    const double theta0 = 0.0503;
    const std::vector<double> theta = uniform_theta(0.2, 128);
    const RecoveredMixing r =
        recover_mixing(profile_from_function([&](double e) { return std::exp(-e * theta0); }, log_eta(0.1, 4000, 300)), theta);
    const double h = theta[1];
    EXPECT_LT(r.cdf_at(theta0 - 2 * h), 1e-3);
    EXPECT_GT(r.cdf_at(theta0 + 2 * h), 1 - 1e-3);
}

TEST(Inversion, GammaLaw) {
    const double beta = 0.02;
    const TransformProfile g =
        profile_from_function([&](double e) { return std::pow(1.0 + beta * e, -2.0); }, log_eta(0.05, 5000, 400));
    InversionOptions o;
    o.talbot_nodes = 32;
    const RecoveredMixing r = invert_laplace(g, uniform_theta(0.4, 512), o);
    double linf = 0.0;
    for (std::size_t i = 0; i < r.theta.size(); ++i) linf = std::max(linf, std::abs(r.cdf[i] - oracle::gamma_cdf(r.theta[i], 2, beta)));
    EXPECT_LT(linf, 1e-3);
    EXPECT_LT(r.diagnostics.clipped_mass, 0.05);
    EXPECT_EQ(r.diagnostics.method, "talbot");
}

TEST(Inversion, GammaRoundTripThroughSlice) {
    // Forward-generate the mixture slice, then recover.
    const double beta = 0.02;
    const LogMoneynessDensity e = to_log_moneyness(mixture_slice(variance_mixture_descriptor(oracle::gamma_law(2, beta), 1.0), 1.0));
    const RecoveredMixing r = recover_mixing(build_G(e, 1.0), default_theta_grid(e, 1.0, 512));
    double linf = 0.0;
    for (std::size_t i = 0; i < r.theta.size(); ++i) linf = std::max(linf, std::abs(r.cdf[i] - oracle::gamma_cdf(r.theta[i], 2, beta)));
    EXPECT_LT(linf, 1e-3);
    EXPECT_LT(r.diagnostics.transform_residual, 1e-4);
}

TEST(Inversion, TwoAtomPlateau) {
    const std::vector<double> theta = uniform_theta(0.2, 128);
    const RecoveredMixing r = recover_mixing(
        profile_from_function([](double e) { return 0.5 * std::exp(-0.01 * e) + 0.5 * std::exp(-0.09 * e); }, log_eta(0.1, 4000, 300)),
        theta);
    const double h = theta[1];
    EXPECT_NEAR(r.cdf_at(0.05), 0.5, 1e-3);
    EXPECT_NEAR(crossing(r, 0.25), 0.01, h);
    EXPECT_NEAR(crossing(r, 0.75), 0.09, h);
}

TEST(Inversion, SignedMeasureFails) {
    // Weights 2 and -1: no probability law has this transform.
    const TransformProfile g =
        profile_from_function([](double e) { return 2.0 * std::exp(-0.05 * e) - std::exp(-0.02 * e); }, log_eta(0.1, 4000, 300));
    InversionOptions o;
    o.screen_order = -1;
    EXPECT_THROW(invert_laplace(g, uniform_theta(0.2, 128), o), CalibrationError);
    EXPECT_THROW(recover_mixing(g, uniform_theta(0.2, 128)), CalibrationError);
}

TEST(Inversion, StehfestAlternative) {
    InversionOptions o;
    o.method = InversionMethod::stehfest;
    const RecoveredMixing r = invert_laplace(
        profile_from_function([](double e) { return std::pow(1.0 + 0.02 * e, -2.0); }, log_eta(0.05, 5000, 400)), uniform_theta(0.4, 256), o);
    EXPECT_EQ(r.diagnostics.method, "stehfest");
    EXPECT_NEAR(r.cdf_at(0.0336), oracle::gamma_cdf(0.0336, 2, 0.02), 2e-2);
}

TEST(LeastSquares, CellMassesReproduceTransform) {
    const std::vector<double> theta = uniform_theta(0.2, 64);
    const TransformProfile g =
        profile_from_function([](double e) { return 0.3 * std::exp(-0.02 * e) + 0.7 * std::exp(-0.11 * e); }, log_eta(0.1, 2000, 200));
    const RecoveredMixing r = fit_transform_masses(g, theta);
    EXPECT_TRUE(r.diagnostics.refit);
    EXPECT_LT(r.diagnostics.transform_residual, 1e-3);
    EXPECT_NEAR(r.cdf.back(), 1.0, 1e-12);
    EXPECT_NEAR(r.cdf_at(0.06), 0.3, 1e-2);
    for (std::size_t i = 1; i < r.cdf.size(); ++i) EXPECT_GE(r.cdf[i], r.cdf[i - 1]);
}

TEST(Calibration, FlatSmileIsOneVol) {
    const MgpDescriptor d = calibrate_mgd({mixture_slice(oracle::atoms({0.04}, {1.0}), 1.0)}, ForwardCurve{0.0, 100.0, {}});
    double lo = 1e300, hi = 0.0;
    for (std::size_t i = 0; i < d.mixing.size(); ++i) {
        lo = std::min(lo, d.total_variance(i, 1.0));
        hi = std::max(hi, d.total_variance(i, 1.0));
    }
    EXPECT_LT(hi - lo, 0.004);
    EXPECT_NEAR(price_european(d, {OptionKind::call, 100, 1}) / oracle::bs_call(100, 100, 0.04), 1.0, 1e-3);
}

TEST(Calibration, GammaRateScaledByTimeIsLinear) {
    MgpDescriptor d;
    d.mixing = oracle::gamma_law(2, 0.02, 2000);
    d.maturities = {0.5, 1.0};
    d.x0 = 100.0;
    for (std::size_t i = 0; i < d.mixing.size(); ++i) d.increments.push_back({0.5 * d.mixing.point(i), 0.5 * d.mixing.point(i)});
    d.theta_lo = 0.0;
    d.theta_hi = d.mixing.edges().back();
    const MgpDescriptor f = calibrate_mgd({mixture_slice(d, 0.5), mixture_slice(d, 1.0)}, d.curve());
    for (std::size_t i = 0; i < f.mixing.size(); ++i)
        EXPECT_NEAR(f.total_variance(i, 0.5) / 0.5, f.total_variance(i, 1.0), 1e-3) << i;
}

TEST(Calibration, TwoAtomRoundTripPrices) {
    MgpDescriptor d;
    d.mixing = MixingLaw::atoms({0.0, 1.0}, {0.5, 0.5});
    d.maturities = {0.5, 1.0};
    d.x0 = 100.0;
    d.rates = RateCurve::flat(0.02);
    d.increments = {{0.005, 0.005}, {0.045, 0.045}};
    const MgpDescriptor f = calibrate_mgd({mixture_slice(d, 0.5), mixture_slice(d, 1.0)}, d.curve());
    for (double t : {0.5, 1.0})
        for (double k : {75.0, 90.0, 100.0, 110.0, 140.0}) {
            const OptionKind kind = k < 100 ? OptionKind::put : OptionKind::call;
            EXPECT_NEAR(price_european(f, {kind, k, t}) / price_european(d, {kind, k, t}), 1.0, 1e-3) << k << " " << t;
        }
}

TEST(Calibration, CalendarArbitrageIsRejected) {
    EXPECT_THROW(calibrate_mgd({mixture_slice(oracle::atoms({0.08}, {1.0}, 0.5), 0.5), mixture_slice(oracle::atoms({0.02}, {1.0}, 1.0), 1.0)},
                               ForwardCurve{0.0, 100.0, {}}),
                 CalibrationError);
}

TEST(Calibration, ForwardMismatchIsInputError) {
    EXPECT_THROW(calibrate_mgd({mixture_slice(oracle::atoms({0.04}, {1.0}), 1.0)}, ForwardCurve{0.0, 100.0, RateCurve::flat(0.05)}),
                 InputError);
}
