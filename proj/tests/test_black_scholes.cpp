#include "mixvol/black_scholes.hpp"
#include "mixvol/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mixvol;

TEST(BlackScholes, NormalFunctions) {
    EXPECT_DOUBLE_EQ(norm_cdf(0.0), 0.5);
    EXPECT_NEAR(norm_cdf(1.96), 0.9750021048517795, 1e-15);
    EXPECT_NEAR(norm_pdf(0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-16);
    for (double p : {1e-10, 0.001, 0.3, 0.5, 0.9, 1 - 1e-9}) EXPECT_NEAR(norm_cdf(norm_inv(p)), p, 1e-14 + 1e-9 * p);
    EXPECT_THROW(norm_inv(0.0), InputError);
}

TEST(BlackScholes, PriceMatchesClosedForm) {
    // At the money: F (2 Phi(sqrt(v) / 2) - 1).
    for (double v : {0.01, 0.09})
        EXPECT_NEAR(black_price(OptionKind::call, 100, 100, v, 1.0), 100 * (2 * oracle::phi(0.5 * std::sqrt(v)) - 1), 1e-11);
    EXPECT_NEAR(black_price(OptionKind::call, 100, 100, 0.01, 1.0), 3.988, 1e-3);
    EXPECT_NEAR(black_price(OptionKind::call, 100, 100, 0.09, 1.0), 11.924, 1e-3);
    for (double k : {60.0, 95.0, 130.0})
        EXPECT_NEAR(black_price(OptionKind::call, 105, k, 0.05, 0.97), oracle::bs_call(105, k, 0.05, 0.97), 1e-11);
}

TEST(BlackScholes, ParityAndIntrinsic) {
    const double c = black_price(OptionKind::call, 100, 110, 0.04, 0.95);
    const double p = black_price(OptionKind::put, 100, 110, 0.04, 0.95);
    EXPECT_NEAR(c - p, 0.95 * (100 - 110), 1e-12);
    EXPECT_DOUBLE_EQ(black_price(OptionKind::call, 100, 90, 0.0, 0.9), 9.0);
    EXPECT_DOUBLE_EQ(black_price(OptionKind::put, 100, 90, 0.0, 0.9), 0.0);
}

TEST(BlackScholes, SensitivitiesMatchFiniteDifferences) {
    for (auto kind : {OptionKind::call, OptionKind::put}) {
        const double f = 100, k = 93, v = 0.07, df = 0.96, h = 1e-3, hs = 1e-6;
        const BlackSensitivities s = black_sensitivities(kind, f, k, v, df);
        const auto p = [&](double ff, double vv) { return black_price(kind, ff, k, vv, df); };
        EXPECT_NEAR(s.d_forward, (p(f + h, v) - p(f - h, v)) / (2 * h), 1e-8);
        EXPECT_NEAR(s.d2_forward, (p(f + h, v) - 2 * p(f, v) + p(f - h, v)) / (h * h), 1e-5);
        const double sv = std::sqrt(v);
        EXPECT_NEAR(s.d_sqrt_var, (p(f, (sv + hs) * (sv + hs)) - p(f, (sv - hs) * (sv - hs))) / (2 * hs), 1e-6);
    }
}

TEST(BlackScholes, ImpliedVarianceRoundTrip) {
    for (double k : {50.0, 90.0, 100.0, 120.0, 200.0})
        for (double v : {0.001, 0.04, 0.5}) {
            const auto kind = k < 100 ? OptionKind::put : OptionKind::call;
            const double price = black_price(kind, 100, k, v, 1.0);
            if (price < 1e-10) continue;
            EXPECT_NEAR(implied_total_variance(kind, 100, k, price, 1.0), v, 1e-8 * std::max(v, 1.0)) << k << " " << v;
        }
    EXPECT_THROW(implied_total_variance(OptionKind::call, 100, 90, 5.0, 1.0), InputError);
    EXPECT_THROW(implied_total_variance(OptionKind::call, 100, 90, 101.0, 1.0), InputError);
}
