#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace mixvol {

using cplx = std::complex<double>;

/// Fixed Talbot contour inversion of a Laplace transform at t > 0.
double talbot_inverse(const std::function<cplx(cplx)>& transform, double t, int nodes = 32);

/// Gaver-Stehfest inversion using real abscissae only; terms must be even.
double stehfest_inverse(const std::function<double(double)>& transform, double t, int terms = 14);

/// Barycentric rational approximant fitted by the AAA algorithm.
class RationalApproximant {
public:
    RationalApproximant() = default;
    RationalApproximant(std::vector<double> support, std::vector<double> values, std::vector<double> weights);

    cplx operator()(cplx s) const;
    double operator()(double s) const { return (*this)(cplx(s, 0.0)).real(); }
    std::vector<cplx> poles() const;
    std::size_t degree() const { return support_.empty() ? 0 : support_.size() - 1; }

private:
    std::vector<double> support_;
    std::vector<double> values_;
    std::vector<double> weights_;
};

struct AaaFit {
    RationalApproximant approximant;
    double max_error = 0.0;   // on the sample set
    std::size_t right_poles = 0; // poles with nonnegative real part
};

/// Greedy AAA sequence on real samples (z, f), one approximant per support
/// size, stopping once the relative tolerance tol is met.
std::vector<AaaFit> aaa_sequence(const std::vector<double>& z, const std::vector<double>& f, double tol = 1e-13,
                                 std::size_t max_support = 100);

/// Fit real samples (z, f) to relative tolerance tol. Returns the most
/// accurate approximant of the greedy sequence.
AaaFit aaa_fit(const std::vector<double>& z, const std::vector<double>& f, double tol = 1e-13,
               std::size_t max_support = 100);

} // namespace mixvol
