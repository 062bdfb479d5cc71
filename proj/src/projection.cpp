#include "mixvol/projection.hpp"

#include "mixvol/errors.hpp"
#include "mixvol/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace mixvol {

namespace {

std::size_t bracket(const std::vector<double>& grid, double v) {
    const auto it = std::upper_bound(grid.begin(), grid.end(), v);
    if (it == grid.begin()) return 0;
    return std::min(static_cast<std::size_t>(it - grid.begin()) - 1, grid.size() - 2);
}

double prior_mean_rate(const MgpDescriptor& desc, double t) {
    double m = 0.0;
    for (std::size_t c = 0; c < desc.mixing.size(); ++c) m += desc.mixing.weight(c) * desc.variance_rate(c, t);
    return m;
}

} // namespace

double LocalVolSurface::value(double xv, double tv, bool* outside) const {
    const bool out_x = xv < x.front() || xv > x.back();
    if (outside) *outside = out_x;
    const double lx = std::log(std::clamp(xv, x.front(), x.back()));
    const double ct = std::clamp(tv, t.front(), t.back());
    double wx = 0.0, wt = 0.0;
    std::size_t ix = 0, it = 0;
    if (x.size() > 1) {
        ix = bracket(x, std::exp(lx));
        const double l0 = std::log(x[ix]), l1 = std::log(x[ix + 1]);
        wx = std::clamp((lx - l0) / (l1 - l0), 0.0, 1.0);
    }
    if (t.size() > 1) {
        it = bracket(t, ct);
        wt = std::clamp((ct - t[it]) / (t[it + 1] - t[it]), 0.0, 1.0);
    }
    const auto node = [&](std::size_t a, std::size_t b) { return at(std::min(a, t.size() - 1), std::min(b, x.size() - 1)); };
    const double lo = (1.0 - wx) * node(it, ix) + wx * node(it, ix + 1);
    const double hi = (1.0 - wx) * node(it + 1, ix) + wx * node(it + 1, ix + 1);
    return (1.0 - wt) * lo + wt * hi;
}

LocalVolSurface project(const MgpDescriptor& desc, const std::vector<double>& x, const std::vector<double>& t,
                        const ProjectionOptions& options) {
    desc.validate();
    require(!x.empty() && !t.empty(), "project: empty grid");
    for (std::size_t i = 0; i < x.size(); ++i)
        require(x[i] > 0.0 && (i == 0 || x[i] > x[i - 1]), "project: x grid must be positive and increasing");
    for (std::size_t j = 0; j < t.size(); ++j)
        require(t[j] >= desc.t0 && t[j] <= desc.horizon() + 1e-12 && (j == 0 || t[j] > t[j - 1]),
                "project: t grid must increase within [t0, horizon]");

    LocalVolSurface s;
    s.x = x;
    s.t = t;
    s.variance.assign(x.size() * t.size(), 0.0);
    s.masked.assign(x.size() * t.size(), 0);
    const std::size_t comps = desc.mixing.size();
    std::vector<double> lw(comps), rate(comps);
    for (std::size_t j = 0; j < t.size(); ++j) {
        const double prior = prior_mean_rate(desc, t[j]);
        if (t[j] <= desc.t0) {
            for (std::size_t i = 0; i < x.size(); ++i) s.variance[j * x.size() + i] = prior;
            continue;
        }
        const double fwd = desc.forward(t[j]);
        std::vector<double> tv(comps);
        for (std::size_t c = 0; c < comps; ++c) {
            tv[c] = desc.total_variance(c, t[j]);
            rate[c] = desc.variance_rate(c, t[j]);
        }
        std::size_t column_masked = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double y = std::log(x[i] / fwd);
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < comps; ++c) {
                const double w = desc.mixing.weight(c);
                if (w <= 0.0 || tv[c] <= 0.0) {
                    lw[c] = -std::numeric_limits<double>::infinity();
                    continue;
                }
                const double z = (y + 0.5 * tv[c]) / std::sqrt(tv[c]);
                lw[c] = std::log(w) - 0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi * tv[c]) - std::log(x[i]);
                top = std::max(top, lw[c]);
            }
            double num = 0.0, den = 0.0;
            if (std::isfinite(top)) {
                for (std::size_t c = 0; c < comps; ++c) {
                    if (!std::isfinite(lw[c])) continue;
                    const double e = std::exp(lw[c] - top);
                    num += e * rate[c];
                    den += e;
                }
            }
            const std::size_t at = j * x.size() + i;
            s.variance[at] = den > 0.0 ? num / den : prior;
            const double density = den > 0.0 ? std::exp(top) * den : 0.0;
            if (density < options.mask_density) {
                s.masked[at] = 1;
                ++column_masked;
            }
        }
        s.masked_cells += column_masked;
        if (column_masked == x.size())
            throw GridError("project: every x is masked at t=" + std::to_string(t[j]) + "; the x grid misses the mass");
    }
    return s;
}

std::vector<double> default_projection_x(const MgpDescriptor& desc, std::size_t points, double span_sd) {
    desc.validate();
    double v = 0.0;
    for (std::size_t c = 0; c < desc.mixing.size(); ++c)
        if (desc.mixing.weight(c) > 0.0) v = std::max(v, desc.total_variance(c, desc.horizon()));
    require(v > 0.0, "default_projection_x: every component is degenerate");
    return log_spaced_grid(desc.forward(desc.horizon()), v, points, span_sd);
}

ProjectionReport verify_projection(const MgpDescriptor& desc, const LocalVolSurface& surface, std::size_t paths,
                                   std::uint64_t seed, const VerifyProjectionOptions& options) {
    require(paths > 1, "verify_projection: need paths");
    require(options.steps_per_year > 0.0, "verify_projection: steps per year must be positive");
    std::vector<double> tests = options.times;
    if (tests.empty())
        for (double tv : surface.t)
            if (tv > desc.t0) tests.push_back(tv);
    require(!tests.empty(), "verify_projection: no test times after t0");
    std::sort(tests.begin(), tests.end());
    require(tests.back() <= desc.horizon() + 1e-12, "verify_projection: test time beyond the horizon");

    std::vector<double> bounds{desc.t0};
    for (double tv : surface.t)
        if (tv > desc.t0 && tv < tests.back()) bounds.push_back(tv);
    bounds.insert(bounds.end(), tests.begin(), tests.end());
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end(),
                             [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, b); }),
                 bounds.end());

    std::vector<double> times{bounds.front()};
    std::vector<std::size_t> record;
    std::size_t next_test = 0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
        const double a = bounds[b], e = bounds[b + 1];
        const std::size_t m =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(options.steps_per_year * (e - a) - 1e-9)));
        for (std::size_t i = 1; i <= m; ++i) times.push_back(i == m ? e : a + (e - a) * static_cast<double>(i) / m);
        while (next_test < tests.size() && std::abs(tests[next_test] - e) <= 1e-12 * std::max(1.0, e)) {
            record.push_back(times.size() - 2);
            ++next_test;
        }
    }
    std::vector<double> rate_integral(times.size() - 1);
    for (std::size_t i = 0; i + 1 < times.size(); ++i) rate_integral[i] = desc.rates.integral(times[i], times[i + 1]);

    EulerKernel k;
    k.seed = seed;
    k.paths = paths;
    k.x0 = desc.x0;
    k.times = times.data();
    k.substeps = times.size() - 1;
    k.rate_integral = rate_integral.data();
    k.record_after = record.data();
    k.records = record.size();
    const double scale = options.variance_scale;
    k.local_variance = [&surface, scale](double xv, double tv, bool* outside) {
        return scale * std::max(surface.value(xv, tv, outside), 0.0);
    };
    std::vector<double> euler(paths * record.size());
    const EulerCounts counts = options.simulation.parallel
                                   ? run_parallel(k, euler.data(), options.simulation.threads)
                                   : run_serial(k, euler.data());

    ProjectionReport report;
    report.escaped_fraction = static_cast<double>(counts.escaped_paths) / static_cast<double>(paths);
    if (report.escaped_fraction > options.escape_limit) {
        std::ostringstream os;
        os << "verify_projection: " << 100.0 * report.escaped_fraction
           << "% of paths left the surface x grid; widen the grid";
        throw GridError(os.str());
    }

    SimulationOptions exact = options.simulation;
    exact.antithetic = false;
    const PathBatch ref = simulate_mgd(desc, tests, paths, seed ^ 0x9E3779B97F4A7C15ULL, exact);
    for (std::size_t r = 0; r < tests.size(); ++r) {
        std::vector<double> a(paths);
        for (std::size_t p = 0; p < paths; ++p) a[p] = euler[p * record.size() + r];
        ProjectionCheck c;
        c.t = tests[r];
        c.ks = ks_two_sample(std::move(a), ref.column(ref.index_of(tests[r])));
        report.max_statistic = std::max(report.max_statistic, c.ks.statistic);
        report.checks.push_back(c);
    }
    return report;
}

std::string surface_csv(const LocalVolSurface& s, bool as_variance) {
    std::ostringstream os;
    char buf[32];
    os << (as_variance ? "t\\x_local_variance" : "t\\x_local_vol");
    for (double xv : s.x) {
        std::snprintf(buf, sizeof buf, ",%.17g", xv);
        os << buf;
    }
    os << '\n';
    for (std::size_t j = 0; j < s.t.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", s.t[j]);
        os << buf;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double v = s.at(j, i);
            std::snprintf(buf, sizeof buf, ",%.17g", as_variance ? v : std::sqrt(std::max(v, 0.0)));
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace mixvol
