#include "mixvol/hierarchical.hpp"

#include "mixvol/errors.hpp"
#include "mixvol/kernels.hpp"
#include "mixvol/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mixvol {

namespace {

std::string layer_tag(std::size_t k) { return "layer " + std::to_string(k) + ": "; }

double lattice_mean(const std::vector<double>& m, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * static_cast<double>(i) * h;
    return s;
}

/// Lattice point i collects the recovered mass of [(i - 1/2) h, (i + 1/2) h).
std::vector<double> lattice_masses(const RecoveredMixing& rec, double h, std::size_t n) {
    std::vector<double> m(n);
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = i + 1 == n ? 1.0 : std::clamp(rec.cdf_at((static_cast<double>(i) + 0.5) * h), 0.0, 1.0);
        m[i] = std::max(z - prev, 0.0);
        prev = std::max(prev, z);
    }
    return m;
}

RecoveredMixing recover_slice(const RiskNeutralSlice& slice, const HierarchyOptions& options, const std::string& what) {
    try {
        const LogMoneynessDensity e = to_log_moneyness(slice);
        const TransformProfile g = build_G(e, default_eta_grid(e, 1.0, options.eta_points), 1.0);
        return recover_mixing(g, default_theta_grid(e, 1.0, options.theta_cells), options.inversion);
    } catch (const CalibrationError& err) {
        throw CalibrationError(what + err.what());
    } catch (const InputError& err) {
        throw InputError(what + err.what());
    }
}

std::vector<double> row_masses(const VarianceCoupling& f) {
    std::vector<double> r(f.n, 0.0);
    for (std::size_t i = 0; i < f.n; ++i)
        for (std::size_t j = i; j < f.n; ++j) r[i] += f.at(i, j);
    return r;
}

/// Rows without mass borrow the nearest row that has some, as the simulator does.
std::size_t usable_row(const std::vector<double>& rows, std::size_t i) {
    for (std::size_t off = 0; off < rows.size(); ++off) {
        if (i >= off && rows[i - off] > 0.0) return i - off;
        if (i + off < rows.size() && rows[i + off] > 0.0) return i + off;
    }
    throw CalibrationError("coupling carries no mass");
}

/// Marginals implied by chaining the couplings from the start row.
void refresh_marginals(HierarchicalModel& m) {
    const std::size_t n = m.n;
    std::vector<double> p(n, 0.0);
    p[m.lattice_index(m.v0)] = 1.0;
    m.marginals.clear();
    for (std::size_t k = 0; k < m.layers(); ++k) {
        const VarianceCoupling& f = m.couplings[k];
        const std::vector<double> rows = row_masses(f);
        VarianceMarginals vm;
        vm.k = k + 1;
        vm.h = m.h;
        vm.total.assign(n, 0.0);
        vm.increment.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (p[i] <= 0.0) continue;
            const std::size_t r = usable_row(rows, i);
            for (std::size_t j = r; j < n; ++j) {
                const double w = p[i] * f.at(r, j) / rows[r];
                if (w <= 0.0) continue;
                const std::size_t d = j - r;
                vm.increment[d] += w;
                vm.total[std::min(i + d, n - 1)] += w;
            }
        }
        p = vm.total;
        m.marginals.push_back(std::move(vm));
    }
}

RiskNeutralSlice lognormal_slice(double x0, double t0, double t, double variance, const RateCurve& rates) {
    MgpDescriptor d;
    d.mixing = MixingLaw::atoms({variance}, {1.0});
    d.maturities = {t};
    d.increments = {{variance}};
    d.t0 = t0;
    d.x0 = x0;
    d.rates = rates;
    return mixture_slice(d, t);
}

} // namespace

double VarianceMarginals::mean_total() const { return lattice_mean(total, h); }
double VarianceMarginals::mean_increment() const { return lattice_mean(increment, h); }

std::vector<VarianceMarginals> recover_variance_marginals(const std::vector<RiskNeutralSlice>& spot,
                                                          const std::vector<RiskNeutralSlice>& ratios, double v0,
                                                          const HierarchyOptions& options) {
    require(!spot.empty(), "recover_variance_marginals: no spot slices");
    require(ratios.size() + 1 == spot.size(), "recover_variance_marginals: need one ratio slice per layer after the first");
    require(options.lattice >= 4, "recover_variance_marginals: lattice too small");
    for (std::size_t k = 1; k < spot.size(); ++k)
        require(spot[k].maturity > spot[k - 1].maturity, "recover_variance_marginals: spot maturities must increase");
    const std::size_t n = options.lattice;
    double top = options.lattice_top;
    if (!(top > 0.0)) top = default_theta_grid(to_log_moneyness(spot.back()), 1.0, options.theta_cells).back();
    const double h = top / static_cast<double>(n - 1);
    require(v0 >= 0.0 && v0 < top, "recover_variance_marginals: v0 outside the lattice");
    const std::size_t i0 = static_cast<std::size_t>(std::lround(v0 / h));

    std::vector<VarianceMarginals> out;
    for (std::size_t k = 1; k <= spot.size(); ++k) {
        VarianceMarginals vm;
        vm.k = k;
        vm.h = h;
        const RecoveredMixing total = recover_slice(spot[k - 1], options, layer_tag(k) + "spot slice: ");
        vm.total = lattice_masses(total, h, n);
        vm.total_diagnostics = total.diagnostics;
        if (k == 1) {
            vm.increment.assign(n, 0.0);
            for (std::size_t i = i0; i < n; ++i) vm.increment[i - i0] = vm.total[i];
            for (std::size_t i = 0; i < i0; ++i) vm.increment[0] += vm.total[i];
            vm.increment_diagnostics = total.diagnostics;
        } else {
            const RecoveredMixing inc = recover_slice(ratios[k - 2], options, layer_tag(k) + "ratio slice: ");
            vm.increment = lattice_masses(inc, h, n);
            vm.increment_diagnostics = inc.diagnostics;
        }
        out.push_back(std::move(vm));
    }
    // v_k >= v_(k-1) pathwise forces first-order dominance of the laws.
    for (std::size_t k = 1; k < out.size(); ++k) {
        double a = 0.0, b = 0.0, worst = 0.0;
        std::size_t at = 0;
        for (std::size_t i = 0; i < n; ++i) {
            a += out[k - 1].total[i];
            b += out[k].total[i];
            if (b - a > worst) {
                worst = b - a;
                at = i;
            }
        }
        if (worst > options.dominance_tolerance) {
            std::ostringstream os;
            os << layer_tag(k + 1) << "total variance law does not dominate layer " << k << " (CDF excess " << worst
               << " at variance " << static_cast<double>(at) * h << ")";
            throw InputError(os.str());
        }
    }
    return out;
}

std::vector<double> VarianceCoupling::row_marginal() const {
    std::vector<double> r(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) r[i] += at(i, j);
    return r;
}

std::vector<double> VarianceCoupling::column_marginal() const {
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) c[j] += at(i, j);
    return c;
}

std::vector<double> VarianceCoupling::diagonal_marginal() const {
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) d[j - i] += at(i, j);
    return d;
}

double VarianceCoupling::max_residual() const {
    return std::max({residual_rows, residual_columns, residual_diagonals});
}

VarianceCoupling couple_marginals(const std::vector<double>& prev, const std::vector<double>& next,
                                  const std::vector<double>& inc, double h, const CouplingOptions& options) {
    const std::size_t n = prev.size();
    require(n >= 2 && next.size() == n && inc.size() == n, "couple_marginals: marginals must share one lattice");
    require(h > 0.0, "couple_marginals: lattice step must be positive");
    for (const auto* m : {&prev, &next, &inc}) {
        double s = 0.0;
        for (double v : *m) {
            require(v >= 0.0, "couple_marginals: negative mass");
            s += v;
        }
        require(std::abs(s - 1.0) <= 1e-6, "couple_marginals: marginal mass differs from one");
    }
    const double mp = lattice_mean(prev, h), mn = lattice_mean(next, h), mi = lattice_mean(inc, h);
    if (std::abs(mn - mp - mi) > options.mean_tolerance * std::max(mn, h)) {
        std::ostringstream os;
        os << "couple_marginals: infeasible, mean of the next law " << mn << " differs from " << mp << " + " << mi;
        throw CalibrationError(os.str());
    }

    VarianceCoupling f;
    f.n = n;
    f.h = h;
    f.mass.assign(n * n, 0.0);
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            if (prev[i] > 0.0 && next[j] > 0.0 && inc[j - i] > 0.0) cells.emplace_back(i, j);

    const auto residuals = [&]() {
        const std::vector<double> r = f.row_marginal(), c = f.column_marginal(), d = f.diagonal_marginal();
        f.residual_rows = f.residual_columns = f.residual_diagonals = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            f.residual_rows += std::abs(r[i] - prev[i]);
            f.residual_columns += std::abs(c[i] - next[i]);
            f.residual_diagonals += std::abs(d[i] - inc[i]);
        }
    };
    VarianceCoupling best;
    const auto keep_best = [&]() {
        residuals();
        if (best.mass.empty() || f.max_residual() < best.max_residual()) best = f;
        return f.max_residual() <= options.tolerance;
    };

    // Damped Newton on the potentials (a_i, b_j, c_(j-i)) of f_ij = exp(a_i + b_j + c_(j-i)).
    // Plain scaling slows to a 1/k rate when the optimum has structural zeros; here the
    // vanishing masses shrink geometrically.
    const Eigen::Index dim = static_cast<Eigen::Index>(3 * n);
    Eigen::VectorXd target(dim), x = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k < n; ++k) {
        target[static_cast<Eigen::Index>(k)] = prev[k];
        target[static_cast<Eigen::Index>(n + k)] = next[k];
        target[static_cast<Eigen::Index>(2 * n + k)] = inc[k];
    }
    const auto slots = [n](std::size_t i, std::size_t j) {
        return std::array<Eigen::Index, 3>{static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n + j),
                                           static_cast<Eigen::Index>(2 * n + j - i)};
    };
    const auto dual = [&](const Eigen::VectorXd& y) {
        double v = 0.0;
        for (const auto& [i, j] : cells) {
            const auto e = slots(i, j);
            v += std::exp(y[e[0]] + y[e[1]] + y[e[2]]);
        }
        return v - target.dot(y);
    };
    const auto load = [&](const Eigen::VectorXd& y) {
        for (const auto& [i, j] : cells) {
            const auto e = slots(i, j);
            f.mass[i * n + j] = std::exp(y[e[0]] + y[e[1]] + y[e[2]]);
        }
    };
    load(x);
    bool done = keep_best();
    double checkpoint = best.max_residual();
    for (std::size_t it = 0; it < options.newton_steps && !done; ++it) {
        if (it % 20 == 19) {
            // Inconsistent marginals leave a residual floor; hand over to scaling there.
            if (best.max_residual() > 0.9 * checkpoint) break;
            checkpoint = best.max_residual();
        }
        Eigen::VectorXd g = -target;
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
        for (const auto& [i, j] : cells) {
            const auto e = slots(i, j);
            const double m = f.mass[i * n + j];
            for (int u = 0; u < 3; ++u) {
                g[e[u]] += m;
                for (int w = 0; w < 3; ++w) hess(e[u], e[w]) += m;
            }
        }
        // The potentials carry a two-dimensional gauge freedom; a small ridge fixes it.
        hess.diagonal().array() += 1e-12 * hess.diagonal().maxCoeff() + 1e-300;
        const Eigen::VectorXd step = hess.ldlt().solve(-g);
        const double f0 = dual(x), slope = g.dot(step);
        if (!std::isfinite(slope) || slope >= 0.0) break;
        double t = 1.0;
        while (t > 1e-10 && dual(x + t * step) > f0 + 1e-4 * t * slope) t *= 0.5;
        if (t <= 1e-10) break;
        x += t * step;
        load(x);
        done = keep_best();
    }

    // Proportional scaling over diagonals, columns and rows from the best point so far.
    f = best;
    std::vector<double> sums(n);
    for (f.sweeps = 0; f.sweeps < options.max_sweeps && !done;) {
        ++f.sweeps;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) sums[j - i] += f.mass[i * n + j];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double s = sums[j - i];
                f.mass[i * n + j] = s > 0.0 ? f.mass[i * n + j] * inc[j - i] / s : 0.0;
            }
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) sums[j] += f.mass[i * n + j];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double s = sums[j];
                f.mass[i * n + j] = s > 0.0 ? f.mass[i * n + j] * next[j] / s : 0.0;
            }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = i; j < n; ++j) s += f.mass[i * n + j];
            const double scale = s > 0.0 ? prev[i] / s : 0.0;
            for (std::size_t j = i; j < n; ++j) f.mass[i * n + j] *= scale;
        }
        done = keep_best();
    }
    const std::size_t sweeps = f.sweeps;
    f = best;
    f.sweeps = sweeps;
    f.converged = f.max_residual() <= options.tolerance;
    if (f.max_residual() > options.infeasible) {
        std::ostringstream os;
        os << "couple_marginals: infeasible after " << f.sweeps << " sweeps, L1 residuals rows " << f.residual_rows
           << ", columns " << f.residual_columns << ", diagonals " << f.residual_diagonals;
        throw CalibrationError(os.str());
    }
    return f;
}

void HierarchicalModel::validate() const {
    require(maturities.size() >= 2, "hierarchical model: need at least one layer");
    for (std::size_t k = 1; k < maturities.size(); ++k)
        require(maturities[k] > maturities[k - 1], "hierarchical model: maturities must increase");
    require(n >= 2 && h > 0.0, "hierarchical model: invalid lattice");
    require(x0 > 0.0, "hierarchical model: x0 must be positive");
    require(v0 >= 0.0 && v0 <= h * static_cast<double>(n - 1), "hierarchical model: v0 outside the lattice");
    require(couplings.size() == layers(), "hierarchical model: one coupling per layer");
    for (const auto& f : couplings)
        require(f.n == n && f.mass.size() == n * n, "hierarchical model: coupling size disagrees with the lattice");
}

std::size_t HierarchicalModel::lattice_index(double v) const {
    const double i = std::round(v / h);
    return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(n - 1)));
}

HierarchicalModel build_hierarchical(const std::vector<RiskNeutralSlice>& spot,
                                     const std::vector<RiskNeutralSlice>& ratios, const ForwardCurve& curve,
                                     double v0, const HierarchyOptions& options, const CouplingOptions& coupling) {
    for (const auto& s : spot)
        require(std::abs(s.forward / curve.forward(s.maturity) - 1.0) <= 1e-6,
                "build_hierarchical: spot slice forward disagrees with the curve at T=" + std::to_string(s.maturity));
    HierarchicalModel m;
    m.marginals = recover_variance_marginals(spot, ratios, v0, options);
    m.maturities.push_back(curve.t0);
    for (const auto& s : spot) m.maturities.push_back(s.maturity);
    m.x0 = curve.x0;
    m.rates = curve.rates;
    m.v0 = v0;
    m.n = options.lattice;
    m.h = m.marginals.front().h;
    const std::size_t n = m.n, i0 = m.lattice_index(v0);

    VarianceCoupling first;
    first.n = n;
    first.h = m.h;
    first.mass.assign(n * n, 0.0);
    for (std::size_t d = 0; d + i0 < n; ++d) first.mass[i0 * n + i0 + d] = m.marginals[0].increment[d];
    first.converged = true;
    m.couplings.push_back(std::move(first));
    for (std::size_t k = 1; k < m.marginals.size(); ++k) {
        try {
            m.couplings.push_back(couple_marginals(m.marginals[k - 1].total, m.marginals[k].total,
                                                   m.marginals[k].increment, m.h, coupling));
        } catch (const CalibrationError& err) {
            throw CalibrationError(layer_tag(k + 1) + err.what());
        }
    }
    m.spot_targets = spot;
    m.ratio_targets = ratios;
    m.validate();
    return m;
}

ConditionalLaw conditional_cdf(const HierarchicalModel& model, std::size_t k, double sigma_prev) {
    model.validate();
    require(k >= 1 && k <= model.layers(), "conditional_cdf: layer out of range");
    ConditionalLaw out;
    out.requested = sigma_prev;
    out.row = model.lattice_index(sigma_prev);
    out.snapped = std::abs(static_cast<double>(out.row) * model.h - sigma_prev) > 1e-9 * std::max(model.h, sigma_prev);
    const VarianceCoupling& f = model.couplings[k - 1];
    double total = 0.0;
    for (std::size_t j = out.row; j < model.n; ++j) total += f.at(out.row, j);
    if (!(total > 0.0))
        throw InputError("conditional_cdf: " + layer_tag(k) + "no mass given prior total variance " +
                         std::to_string(sigma_prev));
    double acc = 0.0;
    for (std::size_t j = out.row; j < model.n; ++j) {
        acc += f.at(out.row, j);
        out.increments.push_back(static_cast<double>(j - out.row) * model.h);
        out.cdf.push_back(std::min(acc / total, 1.0));
    }
    out.cdf.back() = 1.0;
    return out;
}

MgpDescriptor build_layer_parametrization(const HierarchicalModel& model, std::size_t k, double sigma_prev) {
    const ConditionalLaw law = conditional_cdf(model, k, sigma_prev);
    std::vector<double> points, weights;
    double prev = 0.0;
    for (std::size_t d = 0; d < law.cdf.size(); ++d) {
        const double w = law.cdf[d] - prev;
        prev = law.cdf[d];
        if (w <= 0.0) continue;
        points.push_back(law.increments[d]);
        weights.push_back(w);
    }
    MgpDescriptor desc;
    desc.mixing = MixingLaw::atoms(points, weights);
    desc.maturities = {model.maturities[k]};
    for (double p : points) desc.increments.push_back({p});
    desc.t0 = model.maturities[k - 1];
    desc.x0 = 1.0;
    desc.rates = model.rates;
    desc.validate();
    return desc;
}

std::vector<double> chained_marginal(const HierarchicalModel& model, std::size_t k) {
    require(k >= 1 && k <= model.layers(), "chained_marginal: layer out of range");
    HierarchicalModel m = model;
    m.couplings.resize(k);
    m.maturities.resize(k + 1);
    refresh_marginals(m);
    return m.marginals.back().total;
}

void CirParams::validate() const {
    require(kappa > 0.0 && theta > 0.0 && xi > 0.0 && v0 > 0.0, "CIR parameters must all be positive");
}

double cir_integrated_mean(const CirParams& p, double t) {
    return p.theta * t + (p.v0 - p.theta) * (-std::expm1(-p.kappa * t)) / p.kappa;
}

namespace {

std::size_t heston_path(const CirParams& p, const std::vector<double>& maturities, double per_year,
                        const PathRng& rng, double* out) {
    double v = p.v0, integral = 0.0, t = 0.0;
    std::uint32_t step = 0;
    std::size_t truncated = 0;
    for (std::size_t k = 0; k < maturities.size(); ++k) {
        const double span = maturities[k] - t;
        const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(per_year * span - 1e-9)));
        const double dt = span / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double vp = std::max(v, 0.0);
            const double next = v + p.kappa * (p.theta - vp) * dt + p.xi * std::sqrt(vp * dt) * rng.normal(Stream::auxiliary, step++);
            if (next < 0.0) ++truncated;
            integral += 0.5 * (vp + std::max(next, 0.0)) * dt;
            v = next;
        }
        t = maturities[k];
        out[k] = integral;
    }
    return truncated;
}

} // namespace

HestonVarianceSample heston_variance_law(const CirParams& p, const std::vector<double>& maturities,
                                         const HestonOptions& options) {
    p.validate();
    require(!maturities.empty() && maturities.front() > 0.0, "heston_variance_law: maturities must be positive");
    for (std::size_t k = 1; k < maturities.size(); ++k)
        require(maturities[k] > maturities[k - 1], "heston_variance_law: maturities must increase");
    require(options.samples > 0 && options.steps_per_year > 0.0, "heston_variance_law: invalid sampling options");
    HestonVarianceSample s;
    s.maturities = maturities;
    s.samples = options.samples;
    s.integrated.assign(options.samples * maturities.size(), 0.0);
    std::size_t total_steps = 0;
    {
        double t = 0.0;
        for (double m : maturities) {
            total_steps += std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(options.steps_per_year * (m - t) - 1e-9)));
            t = m;
        }
    }
    const long long count = static_cast<long long>(options.samples);
    std::size_t truncated = 0;
    double* out = s.integrated.data();
    const std::size_t width = maturities.size();
#ifdef _OPENMP
    const int workers = options.threads > 0 ? options.threads : available_threads();
#pragma omp parallel for schedule(static) num_threads(workers) reduction(+ : truncated)
#endif
    for (long long i = 0; i < count; ++i) {
        const PathRng rng(options.seed, static_cast<std::uint64_t>(i));
        truncated += heston_path(p, maturities, options.steps_per_year, rng, out + static_cast<std::size_t>(i) * width);
    }
    s.truncation_rate = static_cast<double>(truncated) / (static_cast<double>(total_steps) * static_cast<double>(options.samples));
    s.truncation_warning = s.truncation_rate > 0.05;
    return s;
}

HierarchicalModel empirical_model(const HestonVarianceSample& sample, double x0, const RateCurve& rates,
                                  std::size_t lattice) {
    require(sample.samples > 0 && !sample.maturities.empty(), "empirical_model: empty sample");
    require(lattice >= 2, "empirical_model: lattice too small");
    const std::size_t n = lattice, layers = sample.maturities.size();
    double top = 0.0;
    for (std::size_t s = 0; s < sample.samples; ++s) top = std::max(top, sample.at(s, layers - 1));
    require(top > 0.0, "empirical_model: integrated variance is identically zero");

    HierarchicalModel m;
    m.maturities.push_back(0.0);
    m.maturities.insert(m.maturities.end(), sample.maturities.begin(), sample.maturities.end());
    m.x0 = x0;
    m.rates = rates;
    m.v0 = 0.0;
    m.n = n;
    m.h = top / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < layers; ++k) {
        VarianceCoupling f;
        f.n = n;
        f.h = m.h;
        f.mass.assign(n * n, 0.0);
        f.converged = true;
        m.couplings.push_back(std::move(f));
    }
    const double w = 1.0 / static_cast<double>(sample.samples);
    for (std::size_t s = 0; s < sample.samples; ++s) {
        std::size_t prev = 0;
        for (std::size_t k = 0; k < layers; ++k) {
            const std::size_t idx = std::max(prev, m.lattice_index(sample.at(s, k)));
            m.couplings[k].mass[prev * n + idx] += w;
            prev = idx;
        }
    }
    refresh_marginals(m);
    m.validate();
    return m;
}

std::vector<double> heston_asset_values(const HestonVarianceSample& sample, double x0, const RateCurve& rates,
                                        std::uint64_t seed) {
    const std::size_t width = sample.maturities.size();
    std::vector<double> out(sample.samples * width);
    for (std::size_t s = 0; s < sample.samples; ++s) {
        const PathRng rng(seed, s);
        double logx = std::log(x0), prev_i = 0.0, prev_t = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
            const double di = std::max(sample.at(s, k) - prev_i, 0.0);
            logx += rates.integral(prev_t, sample.maturities[k]) - 0.5 * di +
                    std::sqrt(di) * rng.normal(Stream::brownian, static_cast<std::uint32_t>(k));
            out[s * width + k] = std::exp(logx);
            prev_i = sample.at(s, k);
            prev_t = sample.maturities[k];
        }
    }
    return out;
}

VerificationReport compare_to_heston(const HierarchicalModel& model, const HestonVarianceSample& oracle,
                                     std::size_t paths, std::uint64_t seed, const VerifyOptions& options) {
    model.validate();
    require(oracle.maturities.size() == model.layers(), "compare_to_heston: oracle maturities differ from the model");
    for (std::size_t k = 0; k < model.layers(); ++k)
        require(std::abs(oracle.maturities[k] - model.maturities[k + 1]) <= 1e-12,
                "compare_to_heston: oracle maturities differ from the model");
    const std::vector<double> grid(model.maturities.begin() + 1, model.maturities.end());
    const PathBatch b = simulate_hier(model, grid, paths, seed, options.simulation);
    const std::size_t width = grid.size();
    const std::vector<double> ref = heston_asset_values(oracle, model.x0, model.rates, seed ^ 0x5851F42D4C957F2DULL);
    VerificationReport r;
    for (std::size_t k = 1; k <= width; ++k) {
        for (int ratio = 0; ratio < (k > 1 ? 2 : 1); ++ratio) {
            std::vector<double> a(paths), c(oracle.samples);
            for (std::size_t p = 0; p < paths; ++p)
                a[p] = ratio ? b.value(p, k - 1) / b.value(p, k - 2) : b.value(p, k - 1);
            for (std::size_t s = 0; s < oracle.samples; ++s)
                c[s] = ratio ? ref[s * width + k - 1] / ref[s * width + k - 2] : ref[s * width + k - 1];
            const KsResult ks = ks_two_sample(std::move(a), std::move(c));
            SliceCheck sc;
            sc.name = ratio ? "ratio" : "spot";
            sc.k = k;
            sc.statistic = ks.statistic;
            sc.p_value = ks.p_value;
            sc.pass = ks.statistic <= options.ks_limit;
            r.pass = r.pass && sc.pass;
            r.checks.push_back(sc);
        }
    }
    return r;
}

VerificationReport verify_model(const HierarchicalModel& model, std::size_t paths, std::uint64_t seed,
                                const VerifyOptions& options) {
    model.validate();
    require(!model.spot_targets.empty() || !model.ratio_targets.empty(), "verify_model: model carries no target slices");
    std::vector<double> grid(model.maturities.begin() + 1, model.maturities.end());
    const PathBatch b = simulate_hier(model, grid, paths, seed, options.simulation);
    VerificationReport r;
    const auto record = [&](std::string name, std::size_t k, const KsResult& ks) {
        SliceCheck c;
        c.name = std::move(name);
        c.k = k;
        c.statistic = ks.statistic;
        c.p_value = ks.p_value;
        c.pass = ks.statistic <= options.ks_limit;
        r.pass = r.pass && c.pass;
        r.checks.push_back(c);
    };
    for (std::size_t k = 1; k <= model.spot_targets.size() && k <= model.layers(); ++k) {
        const RiskNeutralSlice& s = model.spot_targets[k - 1];
        record("spot", k, ks_one_sample(b.column(k - 1), [&s](double x) { return s.cdf_at(x); }));
    }
    for (std::size_t k = 2; k <= model.ratio_targets.size() + 1 && k <= model.layers(); ++k) {
        const RiskNeutralSlice& s = model.ratio_targets[k - 2];
        std::vector<double> ratio(paths);
        for (std::size_t p = 0; p < paths; ++p) ratio[p] = b.value(p, k - 1) / b.value(p, k - 2);
        record("ratio", k, ks_one_sample(std::move(ratio), [&s](double x) { return s.cdf_at(x); }));
    }
    return r;
}

HierarchicalModel conditional_restart(const HierarchicalModel& model, std::size_t k, double x, double v_prev,
                                      bool* snapped) {
    model.validate();
    require(k >= 1 && k <= model.layers(), "conditional_restart: layer out of range");
    require(x > 0.0, "conditional_restart: x must be positive");
    const std::size_t row = model.lattice_index(v_prev);
    if (snapped) *snapped = std::abs(static_cast<double>(row) * model.h - v_prev) > 1e-9 * std::max(model.h, v_prev);
    const VarianceCoupling& f = model.couplings[k - 1];
    double total = 0.0;
    for (std::size_t j = row; j < model.n; ++j) total += f.at(row, j);
    if (!(total > 0.0))
        throw InputError("conditional_restart: " + layer_tag(k) + "no mass given total variance " + std::to_string(v_prev));

    HierarchicalModel m;
    m.maturities.assign(model.maturities.begin() + static_cast<std::ptrdiff_t>(k - 1), model.maturities.end());
    m.x0 = x;
    m.rates = model.rates;
    m.v0 = static_cast<double>(row) * model.h;
    m.h = model.h;
    m.n = model.n;
    VarianceCoupling first;
    first.n = m.n;
    first.h = m.h;
    first.mass.assign(m.n * m.n, 0.0);
    first.converged = true;
    for (std::size_t j = row; j < m.n; ++j) first.mass[row * m.n + j] = f.at(row, j) / total;
    m.couplings.push_back(std::move(first));
    for (std::size_t l = k; l < model.layers(); ++l) m.couplings.push_back(model.couplings[l]);
    refresh_marginals(m);
    m.validate();
    return m;
}

HierarchicalModel flat_model(double sigma, const std::vector<double>& maturities, double x0, const RateCurve& rates,
                             std::size_t lattice) {
    require(sigma > 0.0, "flat_model: sigma must be positive");
    require(!maturities.empty() && maturities.front() > 0.0, "flat_model: maturities must be positive");
    require(lattice >= 2, "flat_model: lattice too small");
    const double horizon = maturities.back();
    // Largest lattice on which every maturity's variance is a lattice point.
    std::size_t span = lattice - 1;
    for (std::size_t l = lattice - 1; l >= 1; --l) {
        bool ok = true;
        for (double t : maturities) {
            const double pos = t / horizon * static_cast<double>(l);
            ok = ok && std::abs(pos - std::round(pos)) < 1e-9;
        }
        if (ok) {
            span = l;
            break;
        }
    }
    HierarchicalModel m;
    m.maturities.push_back(0.0);
    m.maturities.insert(m.maturities.end(), maturities.begin(), maturities.end());
    m.x0 = x0;
    m.rates = rates;
    m.n = lattice;
    m.h = sigma * sigma * horizon / static_cast<double>(span);
    std::size_t prev = 0;
    for (std::size_t k = 0; k < maturities.size(); ++k) {
        const std::size_t idx = static_cast<std::size_t>(std::lround(maturities[k] / horizon * static_cast<double>(span)));
        VarianceCoupling f;
        f.n = m.n;
        f.h = m.h;
        f.mass.assign(m.n * m.n, 0.0);
        f.mass[prev * m.n + idx] = 1.0;
        f.converged = true;
        m.couplings.push_back(std::move(f));
        const double t0 = m.maturities[k], t1 = m.maturities[k + 1];
        m.spot_targets.push_back(lognormal_slice(x0, 0.0, t1, static_cast<double>(idx) * m.h, rates));
        if (k > 0) m.ratio_targets.push_back(lognormal_slice(1.0, t0, t1, static_cast<double>(idx - prev) * m.h, rates));
        prev = idx;
    }
    refresh_marginals(m);
    m.validate();
    return m;
}

} // namespace mixvol
