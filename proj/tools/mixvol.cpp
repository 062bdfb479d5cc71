#include "selftest.hpp"

#include "mixvol/errors.hpp"
#include "mixvol/hierarchical.hpp"
#include "mixvol/io.hpp"
#include "mixvol/kernels.hpp"
#include "mixvol/mc_engine.hpp"
#include "mixvol/mgp.hpp"
#include "mixvol/projection.hpp"
#include "mixvol/recovery.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace mixvol;
using io::Json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// "a:b:step" or a comma list.
std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    try {
        if (text.find(':') != std::string::npos) {
            std::vector<double> parts;
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
            require(parts.size() == 3, "grid: expected start:end:step");
            const double a = parts[0], b = parts[1], step = parts[2];
            require(step > 0.0 && b >= a, "grid: need step > 0 and end >= start");
            const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
            for (std::size_t i = 0; i <= n; ++i) out.push_back(a + step * static_cast<double>(i));
            if (b - out.back() > 1e-9 * std::max(1.0, b)) out.push_back(b);
            else out.back() = b;
        } else {
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
        }
    } catch (const std::logic_error&) {
        throw InputError("cannot parse grid \"" + text + "\"");
    }
    require(!out.empty(), "grid: empty");
    for (std::size_t i = 1; i < out.size(); ++i) require(out[i] > out[i - 1], "grid: values must increase");
    return out;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        io::write_text_file(path, text);
}

struct Reprice {
    double max_relative = 0.0;
    double at_strike = 0.0;
    double at_maturity = 0.0;
    std::size_t compared = 0;
    std::size_t skipped = 0;
};

/// Out-of-the-money quotes (puts by parity below the forward) against the
/// model; quotes below 1e-6 of the forward are skipped.
Reprice reprice(const MgpDescriptor& d, const std::vector<OptionChain>& chains) {
    Reprice r;
    for (const auto& c : chains) {
        for (std::size_t i = 0; i < c.strikes.size(); ++i) {
            const double k = c.strikes[i];
            const bool put = k < c.forward;
            const double quote = put ? c.calls[i] - c.discount * (c.forward - k) : c.calls[i];
            if (!(quote > 1e-6 * c.forward * c.discount)) {
                ++r.skipped;
                continue;
            }
            const double model = price_european(d, {put ? OptionKind::put : OptionKind::call, k, c.maturity});
            const double rel = std::abs(model / quote - 1.0);
            ++r.compared;
            if (rel > r.max_relative) {
                r.max_relative = rel;
                r.at_strike = k;
                r.at_maturity = c.maturity;
            }
        }
    }
    return r;
}

Json reprice_json(const Reprice& r) {
    return {{"max_relative_error", r.max_relative}, {"at_strike", r.at_strike}, {"at_maturity", r.at_maturity},
            {"compared", r.compared}, {"skipped", r.skipped}};
}

double forward_start_exact(const MgpDescriptor& d, const PayoffSpec& p) {
    const double growth = std::exp(d.rates.integral(p.start, p.maturity));
    const double disc = d.discount(p.maturity);
    double price = 0.0;
    for (std::size_t c = 0; c < d.mixing.size(); ++c) {
        const double v = d.total_variance(c, p.maturity) - d.total_variance(c, p.start);
        price += d.mixing.weight(c) * black_price(p.option, growth, p.strike, std::max(v, 0.0), disc);
    }
    return price;
}

std::vector<double> payoff_grid(const std::vector<PayoffSpec>& payoffs, double t0) {
    std::vector<double> g{t0};
    for (const auto& p : payoffs) {
        if (p.kind == PayoffSpec::Kind::forward_start_ratio) g.push_back(p.start);
        g.push_back(p.maturity);
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

ForwardCurve curve_for_slices(const Json& spot_json, const std::vector<RiskNeutralSlice>& spot, std::optional<double> x0) {
    const Json& list = spot_json.is_object() && spot_json.contains("chains") ? spot_json.at("chains") : spot_json;
    if (list.is_array() && !list.empty() && list.front().contains("strikes") && !x0)
        return io::curve_from_chains(io::chains_from_json(spot_json));
    double spot0 = x0.value_or(spot.front().forward);
    if (!x0 && spot_json.is_object() && spot_json.contains("x0")) spot0 = spot_json.at("x0").get<double>();
    std::vector<double> times{0.0}, rates;
    double prev_t = 0.0, prev_f = spot0;
    for (std::size_t k = 0; k < spot.size(); ++k) {
        rates.push_back(std::log(spot[k].forward / prev_f) / (spot[k].maturity - prev_t));
        if (k + 1 < spot.size()) times.push_back(spot[k].maturity);
        prev_t = spot[k].maturity;
        prev_f = spot[k].forward;
    }
    return {0.0, spot0, RateCurve(times, rates)};
}

void print_report(const VerificationReport& r) {
    for (const auto& c : r.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " k=" << c.k << " ks=" << fmt(c.statistic)
                  << " p=" << fmt(c.p_value) << '\n';
    std::cout << (r.pass ? "verification passed" : "verification failed") << '\n';
}

SimulationOptions sim_options(int threads, bool antithetic) {
    SimulationOptions o;
    o.threads = threads;
    o.antithetic = antithetic;
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixvol: random volatility models built from mixtures of geometric Brownian motions"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    int threads = 0;
    std::uint64_t seed = 7;
    const auto add_threads = [&](CLI::App* s) { s->add_option("--threads", threads, "worker cap, 0 = OpenMP default"); };
    const auto add_seed = [&](CLI::App* s) { s->add_option("--seed", seed, "base seed of the counter-based generator"); };

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "calibrate a mixture descriptor to option chains");
    std::string chains_path, model_out, sidecar;
    CalibrationOptions copt;
    ChainOptions chopt;
    cal->add_option("--chains", chains_path, "chains JSON")->required();
    cal->add_option("--out", model_out, "model JSON")->required();
    cal->add_option("--diagnostics", sidecar, "sidecar diagnostics JSON (default <out>.diagnostics.json)");
    cal->add_option("--quantiles", copt.quantiles, "quantile grid size");
    cal->add_option("--theta-cells", copt.theta_cells, "cells of the recovered mixing density");
    cal->add_option("--eta-points", copt.eta_points, "points of the transform profile");
    cal->add_option("--talbot-nodes", copt.inversion.talbot_nodes, "fixed Talbot contour nodes");
    cal->add_option("--calendar-limit", copt.calendar_limit, "largest relative calendar repair");
    cal->add_option("--points", chopt.points, "density grid points per slice");
    cal->add_option("--span-sd", chopt.span_sd, "density grid half-width in standard deviations");

    // price
    auto* pr = app.add_subcommand("price", "price payoffs, optionally checking a chain reprice");
    std::string model_path, payoff_path, price_out, check_chains;
    double reprice_limit = 1e-3;
    std::size_t mc_paths = 0;
    pr->add_option("--model", model_path, "model JSON (descriptor or hierarchical)")->required();
    pr->add_option("--payoff", payoff_path, "payoff JSON");
    pr->add_option("--chains", check_chains, "chains JSON to reprice");
    pr->add_option("--tolerance", reprice_limit, "largest relative reprice error before exit 4");
    pr->add_option("--mc-paths", mc_paths, "Monte Carlo paths; 0 = closed form, 100000 for hierarchical models");
    pr->add_option("--out", price_out, "prices JSON (default stdout)");
    add_seed(pr);
    add_threads(pr);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate asset paths");
    std::string grid_text, paths_out, summary_out;
    std::size_t paths = 100000;
    bool no_paths = false, antithetic = false;
    sim->add_option("--model", model_path, "model JSON")->required();
    sim->add_option("--grid", grid_text, "time grid start:end:step or a comma list")->required();
    sim->add_option("--paths", paths, "number of paths");
    sim->add_option("--out", paths_out, "paths CSV");
    sim->add_option("--summary", summary_out, "summary JSON (default stdout)");
    sim->add_flag("--no-paths", no_paths, "skip the paths CSV");
    sim->add_flag("--antithetic", antithetic, "antithetic Brownian pairs");
    add_seed(sim);
    add_threads(sim);

    // project
    auto* proj = app.add_subcommand("project", "Markovian projection to a local volatility surface");
    std::string surface_out, t_grid, report_out;
    bool as_variance = false;
    std::size_t x_points = 200, verify_paths = 0;
    double span_sd = 6.0, proj_ks = 0.015;
    ProjectionOptions popt;
    VerifyProjectionOptions vpopt;
    proj->add_option("--model", model_path, "descriptor JSON")->required();
    proj->add_option("--out", surface_out, "surface CSV")->required();
    proj->add_flag("--as-variance", as_variance, "write local variance instead of local vol");
    proj->add_option("--x-points", x_points, "log-spaced x grid points");
    proj->add_option("--span-sd", span_sd, "x grid half-width in standard deviations");
    proj->add_option("--t-grid", t_grid, "time grid (default t0 to horizon in 20 steps)");
    proj->add_option("--mask-density", popt.mask_density, "density below which cells are masked");
    proj->add_option("--verify-paths", verify_paths, "paths for the Euler verification, 0 = skip");
    proj->add_option("--steps-per-year", vpopt.steps_per_year, "Euler steps per year");
    proj->add_option("--ks-limit", proj_ks, "largest two-sample KS distance before exit 4");
    proj->add_option("--report", report_out, "verification report JSON (default stdout)");
    add_seed(proj);
    add_threads(proj);

    // hier
    auto* hier = app.add_subcommand("hier", "hierarchical models");
    hier->require_subcommand(1);
    auto* hb = hier->add_subcommand("build", "build from spot and forward-start slices");
    std::string spot_path, ratios_path, hier_out;
    double v0 = 0.0;
    std::optional<double> x0_override;
    HierarchyOptions hopt;
    CouplingOptions cpl;
    hb->add_option("--spot", spot_path, "spot chains or slices JSON")->required();
    hb->add_option("--ratios", ratios_path, "forward-start ratio chains or slices JSON");
    hb->add_option("--out", hier_out, "hierarchical model JSON")->required();
    hb->add_option("--v0", v0, "total variance at the first date");
    hb->add_option("--x0", x0_override, "spot when the inputs are slices");
    hb->add_option("--lattice", hopt.lattice, "variance lattice points");
    hb->add_option("--theta-cells", hopt.theta_cells, "cells of each recovered law");
    hb->add_option("--eta-points", hopt.eta_points, "points of each transform profile");
    hb->add_option("--dominance-tolerance", hopt.dominance_tolerance, "allowed CDF excess between layers");
    hb->add_option("--coupling-tolerance", cpl.tolerance, "per-family L1 target of the scaling");
    hb->add_option("--max-sweeps", cpl.max_sweeps, "scaling sweeps");
    hb->add_option("--newton-steps", cpl.newton_steps, "dual Newton steps before scaling");
    hb->add_option("--infeasible", cpl.infeasible, "residual that rejects the marginals");

    auto* hv = hier->add_subcommand("verify", "KS-test a hierarchical model against its targets");
    VerifyOptions vopt;
    hv->add_option("--model", model_path, "hierarchical model JSON")->required();
    hv->add_option("--paths", paths, "number of paths");
    hv->add_option("--ks-limit", vopt.ks_limit, "largest KS distance that passes");
    hv->add_option("--report", report_out, "report JSON");
    add_seed(hv);
    add_threads(hv);

    auto* hh = hier->add_subcommand("heston", "empirical model from uncorrelated Heston variance paths");
    CirParams cir{2.0, 0.04, 0.3, 0.04};
    HestonOptions heo;
    std::string mats_text = "0.5,1";
    double x0 = 100.0, rate = 0.0, heston_ks = 0.015;
    std::size_t lattice = 128;
    hh->add_option("--kappa", cir.kappa, "mean reversion");
    hh->add_option("--theta", cir.theta, "long-run variance");
    hh->add_option("--xi", cir.xi, "vol of variance");
    hh->add_option("--v0", cir.v0, "initial variance");
    hh->add_option("--maturities", mats_text, "comma list of maturities");
    hh->add_option("--samples", heo.samples, "variance paths");
    hh->add_option("--steps-per-year", heo.steps_per_year, "full-truncation Euler steps per year");
    hh->add_option("--lattice", lattice, "variance lattice points");
    hh->add_option("--x0", x0, "spot");
    hh->add_option("--rate", rate, "flat short rate");
    hh->add_option("--out", hier_out, "hierarchical model JSON");
    hh->add_option("--verify-paths", verify_paths, "paths compared against Heston asset paths, 0 = skip");
    hh->add_option("--ks-limit", heston_ks, "largest two-sample KS distance before exit 4");
    add_seed(hh);
    add_threads(hh);

    auto* st = app.add_subcommand("selftest", "run the built-in example suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : static_cast<int>(ErrorKind::input);
    }

    try {
        if (st->parsed()) return cli::run_selftest(std::cout);

        if (cal->parsed()) {
            copt.inversion.talbot_nodes = std::max(copt.inversion.talbot_nodes, 2);
            const std::vector<OptionChain> chains = io::chains_from_json(io::read_json_file(chains_path));
            const ForwardCurve curve = io::curve_from_chains(chains);
            std::vector<RiskNeutralSlice> slices;
            std::vector<ChainDiagnostics> chain_diag(chains.size());
            for (std::size_t k = 0; k < chains.size(); ++k) slices.push_back(chain_to_density(chains[k], &chain_diag[k], chopt));
            CalibrationDiagnostics diag;
            const MgpDescriptor d = calibrate_mgd(slices, curve, copt, &diag);
            io::write_text_file(model_out, io::dump(io::descriptor_to_json(d)));
            const Reprice r = reprice(d, chains);
            Json side = io::calibration_diagnostics_to_json(diag, chain_diag);
            side["reprice"] = reprice_json(r);
            io::write_text_file(sidecar.empty() ? model_out + ".diagnostics.json" : sidecar, io::dump(side));
            std::cout << "calibrated " << chains.size() << " maturities, " << d.mixing.size()
                      << " quantiles; worst reprice error " << fmt(r.max_relative) << " at K=" << fmt(r.at_strike)
                      << " T=" << fmt(r.at_maturity) << '\n';
            return 0;
        }

        if (pr->parsed()) {
            const Json mj = io::read_json_file(model_path);
            const bool hierarchical = io::is_hierarchical(mj);
            require(!payoff_path.empty() || !check_chains.empty(), "price: give --payoff and/or --chains");
            Json out;
            out["schema"] = io::schema_version;
            int status = 0;
            std::vector<PayoffSpec> payoffs;
            if (!payoff_path.empty()) payoffs = io::payoffs_from_json(io::read_json_file(payoff_path));
            Json prices = Json::array();
            if (hierarchical) {
                require(check_chains.empty(), "price: chain reprice needs a descriptor model");
                const HierarchicalModel m = io::hier_from_json(mj);
                const std::size_t n = mc_paths ? mc_paths : 100000;
                const PathBatch b = simulate_hier(m, payoff_grid(payoffs, m.maturities.front()), n, seed, sim_options(threads, false));
                for (const auto& p : payoffs) {
                    const MeanEstimate e = price_mc(b, p);
                    Json j = io::payoff_to_json(p);
                    j["method"] = "monte_carlo";
                    j["price"] = e.mean;
                    j["std_error"] = e.std_error;
                    j["paths"] = n;
                    prices.push_back(j);
                }
            } else {
                const MgpDescriptor d = io::descriptor_from_json(mj);
                std::optional<PathBatch> b;
                if (mc_paths && !payoffs.empty())
                    b = simulate_mgd(d, payoff_grid(payoffs, d.t0), mc_paths, seed, sim_options(threads, false));
                for (const auto& p : payoffs) {
                    Json j = io::payoff_to_json(p);
                    j["method"] = "closed_form";
                    j["price"] = p.kind == PayoffSpec::Kind::european
                                     ? price_european(d, {p.option, p.strike, p.maturity})
                                     : forward_start_exact(d, p);
                    if (b) {
                        const MeanEstimate e = price_mc(*b, p);
                        j["mc_price"] = e.mean;
                        j["mc_std_error"] = e.std_error;
                        j["paths"] = mc_paths;
                    }
                    prices.push_back(j);
                }
                if (!check_chains.empty()) {
                    const Reprice r = reprice(d, io::chains_from_json(io::read_json_file(check_chains)));
                    Json rj = reprice_json(r);
                    rj["tolerance"] = reprice_limit;
                    rj["pass"] = r.max_relative <= reprice_limit;
                    out["reprice"] = rj;
                    std::cerr << "reprice: worst relative error " << fmt(r.max_relative) << " at K=" << fmt(r.at_strike)
                              << " T=" << fmt(r.at_maturity) << " over " << r.compared << " quotes\n";
                    if (r.max_relative > reprice_limit) status = static_cast<int>(ErrorKind::verification);
                }
            }
            out["prices"] = prices;
            emit(price_out, io::dump(out));
            return status;
        }

        if (sim->parsed()) {
            require(no_paths || !paths_out.empty(), "simulate: give --out or --no-paths");
            const Json mj = io::read_json_file(model_path);
            const std::vector<double> grid = parse_grid(grid_text);
            const SimulationOptions so = sim_options(threads, antithetic);
            const PathBatch b = io::is_hierarchical(mj) ? simulate_hier(io::hier_from_json(mj), grid, paths, seed, so)
                                                        : simulate_mgd(io::descriptor_from_json(mj), grid, paths, seed, so);
            if (!no_paths) io::write_text_file(paths_out, io::paths_csv(b));
            Json s;
            s["schema"] = io::schema_version;
            s["paths"] = b.paths;
            s["seed"] = b.seed;
            s["workers"] = b.workers;
            s["antithetic"] = b.antithetic;
            Json rows = Json::array();
            for (std::size_t j = 0; j < b.times.size(); ++j) {
                const std::vector<double> col = b.column(j);
                const MeanEstimate e = mean_and_error(col);
                rows.push_back({{"t", b.times[j]},
                                {"mean", e.mean},
                                {"std_error", e.std_error},
                                {"forward", b.curve.forward(b.times[j])},
                                {"min", *std::min_element(col.begin(), col.end())},
                                {"max", *std::max_element(col.begin(), col.end())}});
            }
            s["times"] = rows;
            emit(summary_out, io::dump(s));
            return 0;
        }

        if (proj->parsed()) {
            const MgpDescriptor d = io::descriptor_from_json(io::read_json_file(model_path));
            std::vector<double> t;
            if (t_grid.empty()) {
                for (int i = 0; i <= 20; ++i) t.push_back(d.t0 + (d.horizon() - d.t0) * i / 20.0);
                t.back() = d.horizon();
            } else {
                t = parse_grid(t_grid);
            }
            const LocalVolSurface s = project(d, default_projection_x(d, x_points, span_sd), t, popt);
            io::write_text_file(surface_out, surface_csv(s, as_variance));
            std::cout << "surface " << s.t.size() << " x " << s.x.size() << ", " << s.masked_cells << " masked cells\n";
            if (verify_paths == 0) return 0;
            vpopt.simulation = sim_options(threads, false);
            const ProjectionReport r = verify_projection(d, s, verify_paths, seed, vpopt);
            Json rj = io::projection_report_to_json(r);
            rj["ks_limit"] = proj_ks;
            rj["pass"] = r.max_statistic <= proj_ks;
            emit(report_out, io::dump(rj));
            return r.max_statistic <= proj_ks ? 0 : static_cast<int>(ErrorKind::verification);
        }

        if (hb->parsed()) {
            const Json sj = io::read_json_file(spot_path);
            const std::vector<RiskNeutralSlice> spot = io::slices_from_json(sj);
            std::vector<RiskNeutralSlice> ratios;
            if (!ratios_path.empty()) ratios = io::slices_from_json(io::read_json_file(ratios_path));
            const ForwardCurve curve = curve_for_slices(sj, spot, x0_override);
            const HierarchicalModel m = build_hierarchical(spot, ratios, curve, v0, hopt, cpl);
            io::write_text_file(hier_out, io::dump(io::hier_to_json(m)));
            std::cout << "built " << m.layers() << " layers on a " << m.n << "-point lattice, h=" << fmt(m.h) << '\n';
            for (std::size_t k = 1; k < m.couplings.size(); ++k)
                std::cout << "layer " << k + 1 << ": " << m.couplings[k].sweeps << " sweeps, residual "
                          << fmt(m.couplings[k].max_residual()) << '\n';
            return 0;
        }

        if (hv->parsed()) {
            const HierarchicalModel m = io::hier_from_json(io::read_json_file(model_path));
            vopt.simulation = sim_options(threads, false);
            const VerificationReport r = verify_model(m, paths, seed, vopt);
            print_report(r);
            if (!report_out.empty()) io::write_text_file(report_out, io::dump(io::verification_to_json(r)));
            return r.pass ? 0 : static_cast<int>(ErrorKind::verification);
        }

        if (hh->parsed()) {
            heo.seed = seed;
            heo.threads = threads;
            const std::vector<double> mats = parse_grid(mats_text);
            const RateCurve rates = RateCurve::flat(rate);
            const HestonVarianceSample s = heston_variance_law(cir, mats, heo);
            const HierarchicalModel m = empirical_model(s, x0, rates, lattice);
            if (!hier_out.empty()) io::write_text_file(hier_out, io::dump(io::hier_to_json(m)));
            std::cout << "Feller ratio " << fmt(cir.feller_ratio()) << ", truncation rate " << fmt(s.truncation_rate) << '\n';
            if (s.truncation_warning) std::cerr << "warning: negative-variance truncation on more than 5% of steps\n";
            for (std::size_t k = 0; k < mats.size(); ++k) {
                std::vector<double> col(s.samples);
                for (std::size_t i = 0; i < s.samples; ++i) col[i] = s.at(i, k);
                const MeanEstimate e = mean_and_error(col);
                std::cout << "T=" << fmt(mats[k]) << " mean integrated variance " << fmt(e.mean) << " +- "
                          << fmt(e.std_error) << " (closed form " << fmt(cir_integrated_mean(cir, mats[k])) << ")\n";
            }
            if (verify_paths == 0) return 0;
            HestonOptions oracle = heo;
            oracle.seed = seed ^ 0xD1B54A32D192ED03ULL;
            oracle.samples = verify_paths;
            VerifyOptions vo;
            vo.ks_limit = heston_ks;
            vo.simulation = sim_options(threads, false);
            const VerificationReport r = compare_to_heston(m, heston_variance_law(cir, mats, oracle), verify_paths, seed, vo);
            print_report(r);
            return r.pass ? 0 : static_cast<int>(ErrorKind::verification);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed input: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::input);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::internal);
    }
    return static_cast<int>(ErrorKind::internal);
}
