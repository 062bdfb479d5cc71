#include "mixvol/errors.hpp"
#include "mixvol/market.hpp"
#include "mixvol/mgp.hpp"
#include "mixvol/stats.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mixvol;

TEST(Forward, ZeroRate) { EXPECT_EQ(forward(ForwardCurve{0.0, 100.0, RateCurve::flat(0.0)}, 1.0), 100.0); }

TEST(Forward, FlatRate) {
    EXPECT_NEAR(forward(ForwardCurve{0.0, 100.0, RateCurve::flat(0.05)}, 2.0), 100.0 * std::exp(0.1), 1e-12);
    EXPECT_NEAR(forward(ForwardCurve{0.0, 100.0, RateCurve::flat(0.05)}, 2.0), 110.517, 1e-3);
}

TEST(Forward, PiecewiseRate) {
    const ForwardCurve c{0.0, 100.0, RateCurve({0.0, 1.0}, {0.02, 0.04})};
    EXPECT_NEAR(forward(c, 2.0), 100.0 * std::exp(0.06), 1e-12);
    EXPECT_NEAR(c.discount(1.5), std::exp(-(0.02 + 0.5 * 0.04)), 1e-15);
    EXPECT_NEAR(c.rates.integral(0.5, 1.5), 0.01 + 0.02, 1e-15);
    EXPECT_DOUBLE_EQ(c.rates.max_rate(), 0.04);
}

TEST(Forward, BeforeStartIsDomainError) {
    EXPECT_THROW(forward(ForwardCurve{1.0, 100.0, {}}, 0.5), InputError);
}

TEST(Slices, LognormalMapsToNormal) {
    const double v = 0.04;
    const RiskNeutralSlice s = mixture_slice(oracle::atoms({v}, {1.0}), 1.0);
    validate_slice(s);
    const LogMoneynessDensity e = to_log_moneyness(s);
    for (std::size_t i = 0; i < e.y.size(); i += 17) EXPECT_NEAR(e.pdf[i], oracle::normal_pdf(e.y[i], -v / 2, v), 1e-12);
}

TEST(Slices, TwoComponentMixtureMapsToNormalMixture) {
    const LogMoneynessDensity e = to_log_moneyness(mixture_slice(oracle::atoms({0.01, 0.09}, {0.5, 0.5}), 1.0));
    for (std::size_t i = 0; i < e.y.size(); i += 13) {
        const double want = 0.5 * oracle::normal_pdf(e.y[i], -0.005, 0.01) + 0.5 * oracle::normal_pdf(e.y[i], -0.045, 0.09);
        EXPECT_NEAR(e.pdf[i], want, 1e-12);
    }
    EXPECT_NEAR(trapezoid(e.y, e.pdf), 1.0, 1e-8);
}

TEST(Slices, CoarseGridIsRejected) {
    const RiskNeutralSlice s = mixture_slice(oracle::atoms({0.04}, {1.0}), 1.0, 9, 6.0);
    EXPECT_THROW(to_log_moneyness(s), GridError);
}

TEST(Slices, RoundTripThroughLogMoneyness) {
    const RiskNeutralSlice s = mixture_slice(oracle::atoms({0.01, 0.09}, {0.3, 0.7}), 1.0);
    const RiskNeutralSlice back = from_log_moneyness(to_log_moneyness(s), s.forward);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        EXPECT_NEAR(back.x[i], s.x[i], 1e-12 * s.x[i]);
        EXPECT_NEAR(back.pdf[i], s.pdf[i], 1e-12 * s.pdf[i] + 1e-300);
    }
    validate_slice(back);
}

TEST(Slices, ValidationCatchesMartingaleBreach) {
    RiskNeutralSlice s = mixture_slice(oracle::atoms({0.04}, {1.0}), 1.0);
    s.forward *= 1.01;
    EXPECT_THROW(validate_slice(s), InputError);
}

namespace {

std::vector<double> strikes(double sigma, std::size_t n, double span) {
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = 100.0 * std::exp(sigma * span * (2.0 * i / (n - 1.0) - 1.0));
    return k;
}

} // namespace

TEST(Chains, BlackScholesChainRecoversLognormal) {
    const RiskNeutralSlice s = chain_to_density(black_chain(100.0, 1.0, 0.2, strikes(0.2, 41, 4.0)));
    std::vector<double> err(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) err[i] = std::abs(s.pdf[i] - oracle::lognormal_pdf(s.x[i], 100.0, 0.04));
    EXPECT_LT(trapezoid(s.x, err), 1e-2);
    validate_slice(s);
}

TEST(Chains, TooFewStrikes) {
    EXPECT_THROW(chain_to_density(black_chain(100.0, 1.0, 0.2, {90, 100, 110})), InputError);
}

TEST(Chains, CrossedQuoteIsRepairedAndReported) {
    OptionChain c = black_chain(100.0, 1.0, 0.2, strikes(0.2, 41, 4.0));
    c.calls[25] = c.calls[24] + 0.01; // call price rising with strike
    ChainDiagnostics d;
    const RiskNeutralSlice s = chain_to_density(c, &d);
    ASSERT_FALSE(d.repairs.empty());
    EXPECT_EQ(d.repairs.front().index, 25u);
    EXPECT_DOUBLE_EQ(d.repairs.front().strike, c.strikes[25]);
    EXPECT_LT(d.repairs.front().adjustment, 0.0);
    validate_slice(s);
}

TEST(Chains, ArbitrageBeyondToleranceNamesStrike) {
    OptionChain c = black_chain(100.0, 1.0, 0.2, strikes(0.2, 41, 4.0));
    c.calls[20] += 5.0;
    try {
        chain_to_density(c);
        FAIL() << "expected a calibration error";
    } catch (const CalibrationError& e) {
        EXPECT_NE(std::string(e.what()).find("worst strike"), std::string::npos);
    }
}

TEST(Chains, DiscountIsRemoved) {
    const OptionChain c = black_chain(100.0, 1.0, 0.2, strikes(0.2, 41, 4.0), 0.9);
    EXPECT_NEAR(c.calls[20], 0.9 * oracle::bs_call(100.0, c.strikes[20], 0.04), 1e-12);
    const RiskNeutralSlice s = chain_to_density(c);
    EXPECT_NEAR(slice_mean(s), 100.0, 1e-2);
}

TEST(Chains, ConvexCleanKeepsConvexInput) {
    const OptionChain c = black_chain(100.0, 1.0, 0.2, strikes(0.2, 21, 3.0));
    const std::vector<double> clean = convex_clean(c.strikes, c.calls, 100.0);
    for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_NEAR(clean[i], c.calls[i], 1e-10);
}

TEST(Chains, PchipInterpolatesMonotone) {
    const Pchip p({0, 1, 2, 3}, {0, 1, 1, 5});
    EXPECT_DOUBLE_EQ(p(1.0), 1.0);
    EXPECT_DOUBLE_EQ(p(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(p(4.0), 5.0);
    for (double x = 1.0; x <= 2.0; x += 0.05) EXPECT_NEAR(p(x), 1.0, 1e-15);
    double prev = -1.0;
    for (double x = 0.0; x <= 3.0; x += 0.01) {
        EXPECT_GE(p(x), prev);
        prev = p(x);
    }
}

TEST(Grids, LogSpacedGridIsCentred) {
    const std::vector<double> x = log_spaced_grid(100.0, 0.04, 101, 5.0);
    EXPECT_EQ(x.size(), 101u);
    EXPECT_NEAR(std::log(x[50] / 100.0), -0.02, 1e-14);
    EXPECT_NEAR(std::log(x.back() / x.front()), 2.0 * 5.0 * 0.2, 1e-12);
}
