#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mixvol {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::size_t m = 0; // zero for the one-sample test
};

/// Asymptotic Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Upper-tail probability of a chi-square statistic.
double chi_square_survival(double statistic, double dof);

/// Weighted least-squares nondecreasing fit (pool adjacent violators).
std::vector<double> isotonic_increasing(const std::vector<double>& values,
                                        const std::vector<double>& weights = {});

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

MeanEstimate mean_and_error(const std::vector<double>& samples);

/// Ordinary least-squares slope of y on x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Trapezoid rule on a possibly non-uniform grid.
double trapezoid(const std::vector<double>& x, const std::vector<double>& f);

/// Running trapezoid integral, starting at zero.
std::vector<double> cumulative_trapezoid(const std::vector<double>& x, const std::vector<double>& f);

/// Piecewise-linear interpolation with flat extrapolation.
double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double at);

} // namespace mixvol
