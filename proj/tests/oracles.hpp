#pragma once

// Closed forms used as independent references by the tests.

#include "mixvol/mgp.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Black-Scholes price written out on the forward.
inline double bs_call(double f, double k, double v, double df = 1.0) {
    const double s = std::sqrt(v);
    const double d1 = (std::log(f / k) + 0.5 * v) / s;
    return df * (f * phi(d1) - k * phi(d1 - s));
}

inline double lognormal_pdf(double x, double f, double v) {
    const double m = std::log(f) - 0.5 * v;
    const double z = (std::log(x) - m) / std::sqrt(v);
    return std::exp(-0.5 * z * z) / (x * std::sqrt(2.0 * std::numbers::pi * v));
}

inline double normal_pdf(double y, double mean, double var) {
    return std::exp(-0.5 * (y - mean) * (y - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Gamma(shape, beta) CDF for integer shape.
inline double gamma_cdf(double x, int shape, double beta) {
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
inline mixvol::MixingLaw gamma_law(int shape, double beta, std::size_t cells = 4000) {
    const double hi = beta * (shape + 40.0);
    std::vector<double> edges(cells + 1), masses(cells);
    for (std::size_t i = 0; i <= cells; ++i) edges[i] = hi * static_cast<double>(i) / cells;
    for (std::size_t i = 0; i < cells; ++i) masses[i] = gamma_cdf(edges[i + 1], shape, beta) - gamma_cdf(edges[i], shape, beta);
    return mixvol::MixingLaw::grid_from_masses(edges, masses);
}

inline mixvol::MgpDescriptor atoms(std::vector<double> v, std::vector<double> w, double t = 1.0, double x0 = 100.0) {
    return mixvol::variance_mixture_descriptor(mixvol::MixingLaw::atoms(std::move(v), std::move(w)), t, x0);
}

/// Slice of X(t1) / X(t0) when the variance accrued over [t0, t1] has the given law and r = 0.
inline mixvol::RiskNeutralSlice ratio_slice(const mixvol::MixingLaw& increments, double t0, double t1,
                                            std::size_t points = 512, double span_sd = 6.0) {
    mixvol::MgpDescriptor r = mixvol::variance_mixture_descriptor(increments, t1, 1.0);
    r.t0 = t0;
    return mixvol::mixture_slice(r, t1, points, span_sd);
}

} // namespace oracle
