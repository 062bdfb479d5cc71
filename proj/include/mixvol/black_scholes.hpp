#pragma once

namespace mixvol {

enum class OptionKind { call, put };

double norm_pdf(double x);
double norm_cdf(double x);
double norm_inv(double p);

/// Black price on the forward with total variance v = sigma^2 T.
/// v = 0 gives the discounted intrinsic value on the forward.
double black_price(OptionKind kind, double forward, double strike, double total_var, double discount);

/// Sensitivities with respect to the forward and to the total volatility
/// sqrt(v). Callers chain-rule to spot and to per-year vol.
struct BlackSensitivities {
    double d_forward = 0.0;
    double d2_forward = 0.0;
    double d_sqrt_var = 0.0;
};

BlackSensitivities black_sensitivities(OptionKind kind, double forward, double strike,
                                       double total_var, double discount);

/// Implied total variance from an undiscounted-consistent price; throws
/// InputError when the price is outside the no-arbitrage band.
double implied_total_variance(OptionKind kind, double forward, double strike, double price,
                              double discount);

} // namespace mixvol
