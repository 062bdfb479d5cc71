#include "mixvol/errors.hpp"
#include "mixvol/stats.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace mixvol;

TEST(Stats, KolmogorovSurvivalMatchesSeries) {
    // Q(l) = 2 sum (-1)^(j-1) exp(-2 j^2 l^2).
    for (double l : {0.5, 0.8, 1.0, 1.36, 2.0}) {
        double q = 0.0;
        for (int j = 1; j < 200; ++j) q += 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * l * l);
        EXPECT_NEAR(kolmogorov_survival(l), q, 1e-12) << l;
    }
    EXPECT_NEAR(kolmogorov_survival(1.358), 0.05, 1e-3);
}

TEST(Stats, OneSampleStatisticOnKnownSample) {
    // Sample {0.1, 0.4, 0.7} against U(0,1): D = max over steps.
    const KsResult r = ks_one_sample({0.7, 0.1, 0.4}, [](double x) { return x; });
    EXPECT_NEAR(r.statistic, std::max({0.1, 1.0 / 3 - 0.1, 0.4 - 1.0 / 3, 2.0 / 3 - 0.4, 0.7 - 2.0 / 3, 1.0 - 0.7}), 1e-15);
    EXPECT_EQ(r.n, 3u);
    EXPECT_EQ(r.m, 0u);
}

TEST(Stats, OneSampleNullIsNotRejected) {
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(20000);
    for (double& v : s) v = u(g);
    const KsResult r = ks_one_sample(s, [](double x) { return std::clamp(x, 0.0, 1.0); });
    EXPECT_LT(r.statistic, 1.63 / std::sqrt(20000.0));
    EXPECT_GT(r.p_value, 0.01);
}

TEST(Stats, TwoSample) {
    EXPECT_EQ(ks_two_sample({1, 2, 3}, {1, 2, 3}).statistic, 0.0);
    const KsResult r = ks_two_sample({1, 2, 3, 4}, {5, 6, 7});
    EXPECT_DOUBLE_EQ(r.statistic, 1.0);
    EXPECT_EQ(r.n, 4u);
    EXPECT_EQ(r.m, 3u);
    EXPECT_NEAR(ks_two_sample({1, 3, 5}, {2, 4, 6}).statistic, 1.0 / 3.0, 1e-15);
}

TEST(Stats, ChiSquareSurvival) {
    // Two degrees of freedom: exp(-x/2). One: erfc(sqrt(x/2)).
    for (double x : {0.1, 1.0, 4.0, 12.0}) {
        EXPECT_NEAR(chi_square_survival(x, 2.0), std::exp(-x / 2.0), 1e-10);
        EXPECT_NEAR(chi_square_survival(x, 1.0), std::erfc(std::sqrt(x / 2.0)), 1e-10);
    }
    EXPECT_THROW(chi_square_survival(1.0, 0.0), InputError);
}

TEST(Stats, Isotonic) {
    EXPECT_EQ(isotonic_increasing({1, 3, 2, 4}), (std::vector<double>{1, 2.5, 2.5, 4}));
    const auto w = isotonic_increasing({3, 1}, {1, 3});
    EXPECT_DOUBLE_EQ(w[0], 1.5);
    EXPECT_DOUBLE_EQ(w[1], 1.5);
    const std::vector<double> up{0, 1, 1, 2};
    EXPECT_EQ(isotonic_increasing(up), up);
}

TEST(Stats, MeanAndError) {
    const MeanEstimate m = mean_and_error({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.std_error, std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0 / 4.0), 1e-15);
}

TEST(Stats, SlopeTrapezoidInterp) {
    EXPECT_NEAR(ols_slope({0, 1, 2, 3}, {1, 3, 5, 7}), 2.0, 1e-14);
    EXPECT_NEAR(trapezoid({0, 1, 3}, {0, 1, 3}), 4.5, 1e-15);
    const auto c = cumulative_trapezoid({0, 1, 3}, {0, 1, 3});
    EXPECT_EQ(c, (std::vector<double>{0, 0.5, 4.5}));
    EXPECT_DOUBLE_EQ(interp_linear({0, 1}, {2, 4}, 0.25), 2.5);
    EXPECT_DOUBLE_EQ(interp_linear({0, 1}, {2, 4}, -1.0), 2.0);
    EXPECT_DOUBLE_EQ(interp_linear({0, 1}, {2, 4}, 9.0), 4.0);
}
