#include "mixvol/black_scholes.hpp"

#include "mixvol/errors.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

namespace mixvol {

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_inv(double p) {
    require(p > 0.0 && p < 1.0, "norm_inv: probability must lie in (0,1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double black_price(OptionKind kind, double forward, double strike, double total_var, double discount) {
    const double sign = kind == OptionKind::call ? 1.0 : -1.0;
    if (total_var <= 0.0) return discount * std::max(sign * (forward - strike), 0.0);
    if (strike <= 0.0) return kind == OptionKind::call ? discount * (forward - strike) : 0.0;
    const double s = std::sqrt(total_var);
    const double d1 = (std::log(forward / strike) + 0.5 * total_var) / s;
    const double d2 = d1 - s;
    return discount * sign * (forward * norm_cdf(sign * d1) - strike * norm_cdf(sign * d2));
}

BlackSensitivities black_sensitivities(OptionKind kind, double forward, double strike,
                                       double total_var, double discount) {
    BlackSensitivities out;
    const double sign = kind == OptionKind::call ? 1.0 : -1.0;
    if (total_var <= 0.0) {
        out.d_forward = (sign * (forward - strike) > 0.0) ? discount * sign : 0.0;
        return out;
    }
    const double s = std::sqrt(total_var);
    const double d1 = (std::log(forward / strike) + 0.5 * total_var) / s;
    out.d_forward = discount * (kind == OptionKind::call ? norm_cdf(d1) : norm_cdf(d1) - 1.0);
    out.d2_forward = discount * norm_pdf(d1) / (forward * s);
    out.d_sqrt_var = discount * forward * norm_pdf(d1);
    return out;
}

double implied_total_variance(OptionKind kind, double forward, double strike, double price,
                              double discount) {
    const double lower = black_price(kind, forward, strike, 0.0, discount);
    const double upper = discount * (kind == OptionKind::call ? forward : strike);
    if (!(price > lower) || !(price < upper))
        throw InputError("implied_total_variance: price outside the no-arbitrage band at strike " +
                         std::to_string(strike));
    // Bisection in total vol, then Newton polish.
    double lo = 0.0, hi = 1.0;
    while (black_price(kind, forward, strike, hi * hi, discount) < price && hi < 1e3) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (black_price(kind, forward, strike, mid * mid, discount) < price)
            lo = mid;
        else
            hi = mid;
    }
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        const double vega = black_sensitivities(kind, forward, strike, s * s, discount).d_sqrt_var;
        if (vega < 1e-300) break;
        const double step = (black_price(kind, forward, strike, s * s, discount) - price) / vega;
        if (!std::isfinite(step) || std::abs(step) > 0.5 * s) break;
        s -= step;
    }
    return s * s;
}

} // namespace mixvol
