#include "mixvol/mc_engine.hpp"

#include "mixvol/errors.hpp"
#include "mixvol/hierarchical.hpp"
#include "mixvol/kernels.hpp"
#include "mixvol/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixvol {

namespace {

/// Internal grid starting at the model start, and the offset of the caller's
/// first point inside it.
struct StepGrid {
    std::vector<double> times;
    std::size_t offset = 0;
};

StepGrid step_grid(const std::vector<double>& grid, double t0, double horizon) {
    require(!grid.empty(), "simulate: empty time grid");
    for (std::size_t j = 0; j < grid.size(); ++j)
        require(j == 0 || grid[j] > grid[j - 1], "simulate: time grid must be strictly increasing");
    require(grid.front() >= t0 - 1e-12, "simulate: time grid starts before the model start");
    require(grid.back() <= horizon + 1e-12 * std::max(1.0, horizon), "simulate: time grid extends past the horizon");
    StepGrid g;
    if (grid.front() > t0) {
        g.times.push_back(t0);
        g.offset = 1;
    }
    g.times.insert(g.times.end(), grid.begin(), grid.end());
    g.times.front() = std::max(g.times.front(), t0);
    return g;
}

std::vector<double> log_drift(const ForwardCurve& curve, const std::vector<double>& times) {
    std::vector<double> out(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) out[j] = curve.rates.integral(curve.t0, times[j]);
    return out;
}

PathBatch run_kernel(const StepGrid& g, const ForwardCurve& curve, std::size_t paths, std::uint64_t seed,
                     const SimulationOptions& options, const std::vector<double>& step_variance, std::size_t rows,
                     const std::vector<std::uint32_t>* row_of_path) {
    const std::vector<double> drift = log_drift(curve, g.times);
    LognormalKernel k;
    k.seed = seed;
    k.paths = paths;
    k.steps = g.times.size() - 1;
    k.x0 = curve.x0;
    k.log_drift = drift.data();
    k.step_variance = step_variance.data();
    k.rows = rows;
    k.row_of_path = row_of_path ? row_of_path->data() : nullptr;
    k.antithetic = options.antithetic;

    std::vector<double> raw(paths * g.times.size());
    if (options.parallel)
        run_parallel(k, raw.data(), options.threads);
    else
        run_serial(k, raw.data());

    PathBatch b;
    b.times.assign(g.times.begin() + static_cast<std::ptrdiff_t>(g.offset), g.times.end());
    b.paths = paths;
    b.seed = seed;
    b.workers = options.parallel ? (options.threads > 0 ? options.threads : available_threads()) : 1;
    b.antithetic = options.antithetic;
    b.curve = curve;
    if (g.offset == 0) {
        b.values = std::move(raw);
    } else {
        const std::size_t w = g.times.size(), m = b.times.size();
        b.values.resize(paths * m);
        for (std::size_t p = 0; p < paths; ++p)
            std::copy(raw.begin() + static_cast<std::ptrdiff_t>(p * w + g.offset),
                      raw.begin() + static_cast<std::ptrdiff_t>((p + 1) * w), b.values.begin() + static_cast<std::ptrdiff_t>(p * m));
    }
    return b;
}

/// Draws of hidden uniforms pair up under antithetic sampling.
std::uint64_t hidden_source(std::size_t p, bool antithetic) { return antithetic ? (p & ~std::size_t{1}) : p; }

} // namespace

double accrued_variance(const std::vector<double>& knots, const std::vector<double>& rates, double a, double b) {
    double v = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        const double lo = std::max(a, knots[k]), hi = std::min(b, knots[k + 1]);
        if (hi > lo) v += rates[k] * (hi - lo);
    }
    return v;
}

std::vector<double> PathBatch::column(std::size_t j) const {
    std::vector<double> out(paths);
    for (std::size_t p = 0; p < paths; ++p) out[p] = value(p, j);
    return out;
}

std::size_t PathBatch::index_of(double t) const {
    for (std::size_t j = 0; j < times.size(); ++j)
        if (std::abs(times[j] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return j;
    throw InputError("time " + std::to_string(t) + " is not on the simulation grid");
}

PathBatch simulate_mgd(const MgpDescriptor& desc, const std::vector<double>& grid, std::size_t paths,
                       std::uint64_t seed, const SimulationOptions& options) {
    desc.validate();
    require(paths > 0, "simulate_mgd: need at least one path");
    require(!options.antithetic || paths % 2 == 0, "simulate_mgd: antithetic sampling needs an even path count");
    const StepGrid g = step_grid(grid, desc.t0, desc.horizon());
    const std::size_t steps = g.times.size() - 1;

    std::vector<double> knots{desc.t0};
    knots.insert(knots.end(), desc.maturities.begin(), desc.maturities.end());
    const std::size_t comps = desc.mixing.size();
    std::vector<double> table(comps * steps);
    for (std::size_t c = 0; c < comps; ++c) {
        std::vector<double> rates(desc.maturities.size());
        for (std::size_t k = 0; k < rates.size(); ++k) rates[k] = desc.increments[c][k] / (knots[k + 1] - knots[k]);
        for (std::size_t j = 0; j < steps; ++j)
            table[c * steps + j] = accrued_variance(knots, rates, g.times[j], g.times[j + 1]);
    }

    std::vector<std::uint32_t> rows(paths);
    std::vector<double> hidden(paths);
    for (std::size_t p = 0; p < paths; ++p) {
        const PathRng rng(seed, hidden_source(p, options.antithetic));
        const double u = rng.uniform(Stream::hidden, 0);
        rows[p] = static_cast<std::uint32_t>(desc.mixing.component_at(u));
        hidden[p] = desc.mixing.quantile(u);
    }
    PathBatch b = run_kernel(g, desc.curve(), paths, seed, options, table, comps, &rows);
    b.hidden = std::move(hidden);
    b.hidden_dim = 1;
    return b;
}

PathBatch simulate_hier(const HierarchicalModel& model, const std::vector<double>& grid, std::size_t paths,
                        std::uint64_t seed, const SimulationOptions& options) {
    model.validate();
    require(paths > 0, "simulate_hier: need at least one path");
    require(!options.antithetic || paths % 2 == 0, "simulate_hier: antithetic sampling needs an even path count");
    const StepGrid g = step_grid(grid, model.maturities.front(), model.maturities.back());
    const std::size_t steps = g.times.size() - 1, layers = model.layers(), n = model.n;

    // Conditional increment CDFs per layer and prior row; rows without mass
    // borrow the nearest row that has some.
    std::vector<std::vector<double>> cum(layers, std::vector<double>(n * n, 0.0));
    std::vector<std::vector<std::size_t>> use_row(layers, std::vector<std::size_t>(n));
    for (std::size_t k = 0; k < layers; ++k) {
        const VarianceCoupling& f = model.couplings[k];
        std::vector<double> row_mass(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = i; j < n; ++j) {
                acc += f.at(i, j);
                cum[k][i * n + (j - i)] = acc;
            }
            row_mass[i] = acc;
            if (acc > 0.0)
                for (std::size_t d = 0; d < n; ++d) cum[k][i * n + d] /= acc;
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = n;
            for (std::size_t off = 0; off < n && best == n; ++off) {
                if (i >= off && row_mass[i - off] > 0.0) best = i - off;
                else if (i + off < n && row_mass[i + off] > 0.0) best = i + off;
            }
            require(best < n, "simulate_hier: layer " + std::to_string(k + 1) + " coupling carries no mass");
            use_row[k][i] = best;
        }
    }

    std::vector<double> table(paths * steps, 0.0);
    std::vector<double> hidden(paths * layers);
    const std::vector<double>& knots = model.maturities;
    const std::size_t start_row = model.lattice_index(model.v0);
    for (std::size_t p = 0; p < paths; ++p) {
        const PathRng rng(seed, hidden_source(p, options.antithetic));
        std::size_t row = start_row;
        std::vector<double> rates(layers);
        double v = model.v0;
        for (std::size_t k = 0; k < layers; ++k) {
            const double u = rng.uniform(Stream::hidden, static_cast<std::uint32_t>(k));
            const std::size_t from = use_row[k][row];
            const double* c = cum[k].data() + from * n;
            const std::size_t width = n - from;
            const std::size_t d = std::min<std::size_t>(
                static_cast<std::size_t>(std::lower_bound(c, c + width, u) - c), width - 1);
            const double inc = static_cast<double>(d) * model.h;
            rates[k] = inc / (knots[k + 1] - knots[k]);
            v += inc;
            row = from + d;
            hidden[p * layers + k] = v;
        }
        for (std::size_t j = 0; j < steps; ++j)
            table[p * steps + j] = accrued_variance(knots, rates, g.times[j], g.times[j + 1]);
    }
    PathBatch b = run_kernel(g, model.curve(), paths, seed, options, table, paths, nullptr);
    b.hidden = std::move(hidden);
    b.hidden_dim = layers;
    return b;
}

PayoffSpec PayoffSpec::european(OptionKind kind, double strike, double maturity) {
    PayoffSpec p;
    p.kind = Kind::european;
    p.option = kind;
    p.strike = strike;
    p.maturity = maturity;
    return p;
}

PayoffSpec PayoffSpec::forward_start(OptionKind kind, double strike, double t1, double t2) {
    require(t2 > t1, "forward-start payoff needs T2 > T1");
    PayoffSpec p;
    p.kind = Kind::forward_start_ratio;
    p.option = kind;
    p.strike = strike;
    p.start = t1;
    p.maturity = t2;
    return p;
}

PayoffSpec PayoffSpec::custom(std::function<double(const double*, const std::vector<double>&)> f, double pay_time) {
    PayoffSpec p;
    p.kind = Kind::custom;
    p.functional = std::move(f);
    p.maturity = pay_time;
    return p;
}

MeanEstimate price_mc(const PathBatch& batch, const PayoffSpec& payoff) {
    require(batch.paths > 0, "price_mc: empty batch");
    const std::size_t w = batch.times.size();
    std::size_t j1 = 0, j2 = 0;
    if (payoff.kind == PayoffSpec::Kind::european) j2 = batch.index_of(payoff.maturity);
    if (payoff.kind == PayoffSpec::Kind::forward_start_ratio) {
        j1 = batch.index_of(payoff.start);
        j2 = batch.index_of(payoff.maturity);
    }
    require(payoff.kind != PayoffSpec::Kind::custom || static_cast<bool>(payoff.functional),
            "price_mc: custom payoff without a functional");
    const auto intrinsic = [&](double s) {
        return payoff.option == OptionKind::call ? std::max(s - payoff.strike, 0.0) : std::max(payoff.strike - s, 0.0);
    };
    std::vector<double> pay(batch.paths);
    for (std::size_t p = 0; p < batch.paths; ++p) {
        const double* row = batch.values.data() + p * w;
        switch (payoff.kind) {
        case PayoffSpec::Kind::european: pay[p] = intrinsic(row[j2]); break;
        case PayoffSpec::Kind::forward_start_ratio: pay[p] = intrinsic(row[j2] / row[j1]); break;
        case PayoffSpec::Kind::custom: pay[p] = payoff.functional(row, batch.times); break;
        }
    }
    if (batch.antithetic) {
        std::vector<double> pairs(batch.paths / 2);
        for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = 0.5 * (pay[2 * i] + pay[2 * i + 1]);
        pay = std::move(pairs);
    }
    MeanEstimate m = mean_and_error(pay);
    const double df = batch.curve.discount(payoff.maturity);
    m.mean *= df;
    m.std_error *= df;
    return m;
}

MixingLaw posterior_mixing(const MgpDescriptor& desc, double t1, double x1) {
    desc.validate();
    require(t1 > desc.t0 && t1 <= desc.horizon() + 1e-12, "posterior_mixing: need t0 < t1 <= horizon");
    require(x1 > 0.0, "posterior_mixing: x1 must be positive");
    const double fwd = desc.forward(t1);
    const double y = std::log(x1 / fwd);
    const std::size_t n = desc.mixing.size();
    std::vector<double> loglik(n, -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
        const double w = desc.mixing.weight(c);
        const double v = desc.total_variance(c, t1);
        if (w <= 0.0 || v <= 0.0) continue;
        const double z = (y + 0.5 * v) / std::sqrt(v);
        loglik[c] = std::log(w) - 0.5 * z * z - 0.5 * std::log(v);
        top = std::max(top, loglik[c]);
    }
    if (!(top > -745.0))
        throw InputError("posterior_mixing: observation has zero likelihood under every component");
    std::vector<double> post(n, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        if (!std::isfinite(loglik[c])) continue;
        post[c] = std::exp(loglik[c] - top);
        total += post[c];
    }
    for (double& p : post) p /= total;
    return desc.mixing.with_weights(post);
}

MgpDescriptor restart_descriptor(const MgpDescriptor& desc, double t1, double x1) {
    require(t1 < desc.horizon(), "restart_descriptor: no maturity left after t1");
    MgpDescriptor out;
    out.mixing = posterior_mixing(desc, t1, x1);
    out.t0 = t1;
    out.x0 = x1;
    out.rates = desc.rates;
    out.theta_lo = desc.theta_lo;
    out.theta_hi = desc.theta_hi;
    for (double t : desc.maturities)
        if (t > t1 + 1e-12 * std::max(1.0, t1)) out.maturities.push_back(t);
    out.increments.assign(desc.mixing.size(), std::vector<double>(out.maturities.size()));
    for (std::size_t c = 0; c < desc.mixing.size(); ++c) {
        double prev = desc.total_variance(c, t1);
        for (std::size_t k = 0; k < out.maturities.size(); ++k) {
            const double v = desc.total_variance(c, out.maturities[k]);
            out.increments[c][k] = std::max(v - prev, 0.0);
            prev = v;
        }
    }
    out.validate();
    return out;
}

} // namespace mixvol
