#include "mixvol/laplace.hpp"

#include "mixvol/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixvol {

double talbot_inverse(const std::function<cplx(cplx)>& transform, double t, int nodes) {
    require(t > 0.0, "talbot_inverse: t must be positive");
    require(nodes >= 2, "talbot_inverse: need at least two nodes");
    const double r = 2.0 * nodes / (5.0 * t);
    double sum = 0.5 * std::exp(r * t) * transform(cplx(r, 0.0)).real();
    for (int k = 1; k < nodes; ++k) {
        const double theta = k * std::numbers::pi / nodes;
        const double cot = 1.0 / std::tan(theta);
        const cplx s(r * theta * cot, r * theta);
        const double sigma = theta + (theta * cot - 1.0) * cot;
        sum += (std::exp(t * s) * transform(s) * cplx(1.0, sigma)).real();
    }
    return r / nodes * sum;
}

double stehfest_inverse(const std::function<double(double)>& transform, double t, int terms) {
    require(t > 0.0, "stehfest_inverse: t must be positive");
    require(terms >= 2 && terms % 2 == 0, "stehfest_inverse: terms must be even");
    const int half = terms / 2;
    auto fact = [](int n) {
        double f = 1.0;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    const double ln2 = std::numbers::ln2;
    double sum = 0.0;
    for (int k = 1; k <= terms; ++k) {
        double v = 0.0;
        for (int j = (k + 1) / 2; j <= std::min(k, half); ++j)
            v += std::pow(j, half) * fact(2 * j) /
                 (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
        if ((k + half) % 2 == 1) v = -v;
        sum += v * transform(k * ln2 / t);
    }
    return ln2 / t * sum;
}

RationalApproximant::RationalApproximant(std::vector<double> support, std::vector<double> values,
                                         std::vector<double> weights)
    : support_(std::move(support)), values_(std::move(values)), weights_(std::move(weights)) {}

cplx RationalApproximant::operator()(cplx s) const {
    cplx num(0.0, 0.0), den(0.0, 0.0);
    for (std::size_t j = 0; j < support_.size(); ++j) {
        const cplx diff = s - support_[j];
        if (diff == cplx(0.0, 0.0)) return values_[j];
        const cplx c = weights_[j] / diff;
        num += c * values_[j];
        den += c;
    }
    return num / den;
}

std::vector<cplx> RationalApproximant::poles() const {
    const std::size_t m = support_.size();
    if (m < 2) return {};
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m + 1, m + 1);
    b(0, 0) = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        e(0, j + 1) = weights_[j];
        e(j + 1, 0) = 1.0;
        e(j + 1, j + 1) = support_[j];
    }
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> solver(e, b, false);
    std::vector<cplx> out;
    const auto alphas = solver.alphas();
    const auto betas = solver.betas();
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        if (std::abs(betas(i)) <= 1e-13 * std::abs(alphas(i))) continue;
        out.push_back(alphas(i) / betas(i));
    }
    return out;
}

std::vector<AaaFit> aaa_sequence(const std::vector<double>& z, const std::vector<double>& f, double tol,
                                 std::size_t max_support) {
    const std::size_t n = z.size();
    require(n >= 2 && f.size() == n, "aaa_fit: need at least two matching samples");
    double scale = 0.0, mean = 0.0;
    for (double v : f) {
        scale = std::max(scale, std::abs(v));
        mean += v / n;
    }
    require(scale > 0.0, "aaa_fit: samples are identically zero");

    std::vector<bool> in_support(n, false);
    std::vector<std::size_t> support;
    std::vector<double> approx(n, mean);
    std::vector<AaaFit> out;

    for (std::size_t step = 0; step < std::min(max_support, n - 1); ++step) {
        std::size_t pick = 0;
        double worst = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (in_support[i]) continue;
            const double err = std::abs(f[i] - approx[i]);
            if (err > worst) {
                worst = err;
                pick = i;
            }
        }
        in_support[pick] = true;
        support.push_back(pick);
        const std::size_t m = support.size();

        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_support[i]) rest.push_back(i);
        Eigen::MatrixXd loewner(rest.size(), m);
        for (std::size_t r = 0; r < rest.size(); ++r)
            for (std::size_t j = 0; j < m; ++j)
                loewner(r, j) = (f[rest[r]] - f[support[j]]) / (z[rest[r]] - z[support[j]]);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(loewner, Eigen::ComputeThinV);
        const Eigen::VectorXd w = svd.matrixV().col(m - 1);

        std::vector<double> zs(m), fs(m), ws(m);
        for (std::size_t j = 0; j < m; ++j) {
            zs[j] = z[support[j]];
            fs[j] = f[support[j]];
            ws[j] = w(j);
        }
        RationalApproximant candidate(zs, fs, ws);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            approx[i] = candidate(z[i]);
            err = std::max(err, std::abs(f[i] - approx[i]));
        }
        if (!std::isfinite(err)) break;

        AaaFit fit;
        fit.approximant = candidate;
        fit.max_error = err;
        for (const cplx& p : candidate.poles())
            if (p.real() >= 0.0) ++fit.right_poles;
        out.push_back(std::move(fit));
        if (err <= tol * scale) break;
    }
    require(!out.empty(), "aaa_fit: no finite rational approximant found");
    return out;
}

AaaFit aaa_fit(const std::vector<double>& z, const std::vector<double>& f, double tol, std::size_t max_support) {
    std::vector<AaaFit> seq = aaa_sequence(z, f, tol, max_support);
    return *std::min_element(seq.begin(), seq.end(),
                             [](const AaaFit& a, const AaaFit& b) { return a.max_error < b.max_error; });
}

} // namespace mixvol
