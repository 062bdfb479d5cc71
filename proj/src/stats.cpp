#include "mixvol/stats.hpp"

#include "mixvol/errors.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

namespace mixvol {

double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_pvalue(double d, double n_eff) {
    const double root = std::sqrt(n_eff);
    return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

} // namespace

KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf) {
    require(!sample.empty(), "ks_one_sample: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return {d, ks_pvalue(d, n), sample.size(), 0};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return {d, ks_pvalue(d, na * nb / (na + nb)), a.size(), b.size()};
}

double chi_square_survival(double statistic, double dof) {
    require(dof > 0.0, "chi_square_survival: dof must be positive");
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

std::vector<double> isotonic_increasing(const std::vector<double>& values,
                                        const std::vector<double>& weights) {
    const std::size_t n = values.size();
    require(weights.empty() || weights.size() == n, "isotonic_increasing: weight size mismatch");
    std::vector<double> level, weight;
    std::vector<std::size_t> count;
    level.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        level.push_back(values[i]);
        weight.push_back(weights.empty() ? 1.0 : weights[i]);
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const std::size_t last = level.size() - 1;
            const double w = weight[last - 1] + weight[last];
            level[last - 1] = (level[last - 1] * weight[last - 1] + level[last] * weight[last]) / w;
            weight[last - 1] = w;
            count[last - 1] += count[last];
            level.pop_back();
            weight.pop_back();
            count.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), count[b], level[b]);
    return out;
}

MeanEstimate mean_and_error(const std::vector<double>& samples) {
    require(samples.size() >= 2, "mean_and_error: need at least two samples");
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "ols_slope: need matching samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    require(sxx > 0.0, "ols_slope: degenerate abscissae");
    return sxy / sxx;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    return s;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    return out;
}

double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double at) {
    if (at <= x.front()) return y.front();
    if (at >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), at);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double w = (at - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + w * (y[i] - y[i - 1]);
}

} // namespace mixvol
