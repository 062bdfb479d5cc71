#include "mixvol/laplace.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixvol;

TEST(Talbot, ExponentialAndPowers) {
    for (double t : {0.1, 1.0, 5.0}) {
        EXPECT_NEAR(talbot_inverse([](cplx s) { return 1.0 / (s + 1.0); }, t), std::exp(-t), 1e-10);
        EXPECT_NEAR(talbot_inverse([](cplx s) { return 1.0 / (s * s); }, t), t, 1e-11 * std::max(t, 1.0));
    }
    // Gamma(2, beta) density: (1 + beta s)^-2.
    const double beta = 0.02;
    for (double t : {0.005, 0.02, 0.1})
        EXPECT_NEAR(talbot_inverse([&](cplx s) { return 1.0 / ((1.0 + beta * s) * (1.0 + beta * s)); }, t),
                    t / (beta * beta) * std::exp(-t / beta), 1e-8 / beta);
}

TEST(Talbot, MoreNodesIsMoreAccurate) {
    const auto f = [](cplx s) { return 1.0 / (s * s + 1.0); };
    const double e16 = std::abs(talbot_inverse(f, 2.0, 16) - std::sin(2.0));
    const double e32 = std::abs(talbot_inverse(f, 2.0, 32) - std::sin(2.0));
    EXPECT_LT(e32, e16);
    EXPECT_LT(e32, 1e-10);
}

TEST(Stehfest, Exponential) {
    EXPECT_NEAR(stehfest_inverse([](double s) { return 1.0 / (s + 1.0); }, 1.0), std::exp(-1.0), 1e-5);
    EXPECT_NEAR(stehfest_inverse([](double s) { return 1.0 / (s * s); }, 2.0), 2.0, 1e-5);
}

TEST(Aaa, RecoversRationalFunction) {
    std::vector<double> z, f;
    for (int i = 0; i < 200; ++i) {
        const double x = 0.01 * std::pow(1e4, i / 199.0);
        z.push_back(x);
        f.push_back(0.5 / (1.0 + 0.01 * x) + 0.5 / (1.0 + 0.09 * x));
    }
    const AaaFit fit = aaa_fit(z, f);
    EXPECT_LT(fit.max_error, 1e-12);
    EXPECT_EQ(fit.right_poles, 0u);
    EXPECT_LE(fit.approximant.degree(), 4u);
    const cplx s(3.0, 7.0);
    const cplx want = 0.5 / (1.0 + 0.01 * s) + 0.5 / (1.0 + 0.09 * s);
    EXPECT_LT(std::abs(fit.approximant(s) - want), 1e-9);
    bool found = false;
    for (const cplx& p : fit.approximant.poles()) found = found || std::abs(p - cplx(-100.0, 0.0)) < 1e-5;
    EXPECT_TRUE(found);
}

TEST(Aaa, ExponentialSamplesInvertToStep) {
    std::vector<double> z, f;
    for (int i = 0; i < 300; ++i) {
        const double x = 0.1 * std::pow(4e4, i / 299.0);
        z.push_back(x);
        f.push_back(std::exp(-0.05 * x));
    }
    const AaaFit fit = aaa_fit(z, f);
    const auto cdf = [&](cplx s) { return fit.approximant(s) / s; };
    // Away from the jump; next to it the continuation rings.
    EXPECT_NEAR(talbot_inverse(cdf, 0.03), 0.0, 1e-3);
    EXPECT_NEAR(talbot_inverse(cdf, 0.1), 1.0, 1e-2);
}
