#include "mixvol/io.hpp"

#include "mixvol/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mixvol::io {

namespace {

template <class T>
T field(const Json& j, const char* key, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) throw InputError(what + ": missing field \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(what + ": field \"" + key + "\" has the wrong type (" + e.what() + ")");
    }
}

template <class T>
T field_or(const Json& j, const char* key, T fallback, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return field<T>(j, key, what);
}

void check_schema(const Json& j, const std::string& what) {
    if (j.is_object() && j.contains("schema") && j.at("schema") != schema_version)
        throw InputError(what + ": unsupported schema " + j.at("schema").dump());
}

const Json& list_member(const Json& j, const char* key) {
    if (j.is_object() && j.contains(key)) return j.at(key);
    return j;
}

const char* option_name(OptionKind k) { return k == OptionKind::call ? "call" : "put"; }

OptionKind option_from(const std::string& s) {
    if (s == "call") return OptionKind::call;
    if (s == "put") return OptionKind::put;
    throw InputError("payoff: option must be \"call\" or \"put\", got \"" + s + "\"");
}

} // namespace

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), path);
}

Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(what + ": " + e.what());
    }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << text;
    if (!out) throw InputError("write failed for " + path);
}

Json rates_to_json(const RateCurve& rates) {
    Json j;
    j["times"] = rates.times();
    j["rates"] = rates.rates();
    return j;
}

RateCurve rates_from_json(const Json& j) {
    if (j.is_number()) return RateCurve::flat(j.get<double>());
    return RateCurve(field<std::vector<double>>(j, "times", "rates"), field<std::vector<double>>(j, "rates", "rates"));
}

OptionChain chain_from_json(const Json& j) {
    OptionChain c;
    c.maturity = field<double>(j, "maturity", "chain");
    c.forward = field<double>(j, "forward", "chain");
    c.discount = field_or<double>(j, "discount", 1.0, "chain");
    c.strikes = field<std::vector<double>>(j, "strikes", "chain");
    c.calls = field<std::vector<double>>(j, "calls", "chain");
    require(c.maturity > 0.0 && c.forward > 0.0 && c.discount > 0.0, "chain: maturity, forward, discount must be positive");
    require(c.strikes.size() == c.calls.size(), "chain: strikes and calls differ in length");
    return c;
}

Json chain_to_json(const OptionChain& c) {
    Json j;
    j["maturity"] = c.maturity;
    j["forward"] = c.forward;
    j["discount"] = c.discount;
    j["strikes"] = c.strikes;
    j["calls"] = c.calls;
    return j;
}

std::vector<OptionChain> chains_from_json(const Json& j) {
    check_schema(j, "chains");
    const Json& list = list_member(j, "chains");
    std::vector<OptionChain> out;
    if (list.is_object()) {
        out.push_back(chain_from_json(list));
    } else if (list.is_array()) {
        for (const auto& c : list) out.push_back(chain_from_json(c));
    } else {
        throw InputError("chains: expected an object or an array");
    }
    require(!out.empty(), "chains: no chains");
    std::sort(out.begin(), out.end(), [](const OptionChain& a, const OptionChain& b) { return a.maturity < b.maturity; });
    for (std::size_t k = 1; k < out.size(); ++k)
        require(out[k].maturity > out[k - 1].maturity, "chains: duplicate maturity");
    return out;
}

Json chains_to_json(const std::vector<OptionChain>& chains) {
    Json j;
    j["schema"] = schema_version;
    j["chains"] = Json::array();
    for (const auto& c : chains) j["chains"].push_back(chain_to_json(c));
    return j;
}

ForwardCurve curve_from_chains(const std::vector<OptionChain>& chains) {
    require(!chains.empty(), "curve_from_chains: no chains");
    const double x0 = chains.front().forward * chains.front().discount;
    std::vector<double> times{0.0}, rates;
    double prev_t = 0.0, prev_f = x0;
    for (const auto& c : chains) {
        const double spot = c.forward * c.discount;
        if (std::abs(spot / x0 - 1.0) > 1e-6) {
            std::ostringstream os;
            os << "chains: forward times discount is " << spot << " at T=" << c.maturity << " but " << x0
               << " at the first maturity";
            throw InputError(os.str());
        }
        rates.push_back(std::log(c.forward / prev_f) / (c.maturity - prev_t));
        if (&c != &chains.back()) times.push_back(c.maturity);
        prev_t = c.maturity;
        prev_f = c.forward;
    }
    return {0.0, x0, RateCurve(times, rates)};
}

Json slice_to_json(const RiskNeutralSlice& s) {
    Json j;
    j["maturity"] = s.maturity;
    j["forward"] = s.forward;
    j["x"] = s.x;
    j["pdf"] = s.pdf;
    j["cdf"] = s.cdf;
    return j;
}

RiskNeutralSlice slice_from_json(const Json& j) {
    RiskNeutralSlice s;
    s.maturity = field<double>(j, "maturity", "slice");
    s.forward = field<double>(j, "forward", "slice");
    s.x = field<std::vector<double>>(j, "x", "slice");
    s.pdf = field<std::vector<double>>(j, "pdf", "slice");
    if (j.contains("cdf"))
        s.cdf = field<std::vector<double>>(j, "cdf", "slice");
    else
        rebuild_cdf(s);
    validate_slice(s);
    return s;
}

Json slices_to_json(const std::vector<RiskNeutralSlice>& slices) {
    Json j;
    j["schema"] = schema_version;
    j["slices"] = Json::array();
    for (const auto& s : slices) j["slices"].push_back(slice_to_json(s));
    return j;
}

std::vector<RiskNeutralSlice> slices_from_json(const Json& j, const ChainOptions& chain_options) {
    check_schema(j, "slices");
    const Json* list = &j;
    if (j.is_object() && j.contains("slices")) list = &j.at("slices");
    else if (j.is_object() && j.contains("chains")) list = &j.at("chains");
    std::vector<RiskNeutralSlice> out;
    const auto one = [&](const Json& e) {
        if (e.is_object() && e.contains("strikes"))
            out.push_back(chain_to_density(chain_from_json(e), nullptr, chain_options));
        else
            out.push_back(slice_from_json(e));
    };
    if (list->is_array()) {
        for (const auto& e : *list) one(e);
    } else if (list->is_object()) {
        one(*list);
    } else {
        throw InputError("slices: expected an object or an array");
    }
    return out;
}

std::string slice_csv(const RiskNeutralSlice& s) {
    std::ostringstream os;
    char buf[96];
    os << "x,pdf,cdf\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.x[i], s.pdf[i], s.cdf[i]);
        os << buf;
    }
    return os.str();
}

Json mixing_to_json(const MixingLaw& law) {
    Json j;
    if (law.kind() == MixingLaw::Kind::atoms) {
        Json atoms = Json::array();
        for (std::size_t i = 0; i < law.size(); ++i) atoms.push_back({law.point(i), law.weight(i)});
        j["atoms"] = atoms;
    } else {
        j["grid"] = {{"edges", law.edges()}, {"masses", law.weights()}};
    }
    return j;
}

MixingLaw mixing_from_json(const Json& j) {
    if (j.is_object() && j.contains("atoms")) {
        std::vector<double> points, weights;
        for (const auto& a : j.at("atoms")) {
            if (!a.is_array() || a.size() != 2) throw InputError("mixing: each atom is [theta, weight]");
            points.push_back(a[0].get<double>());
            weights.push_back(a[1].get<double>());
        }
        return MixingLaw::atoms(points, weights);
    }
    if (j.is_object() && j.contains("grid")) {
        const Json& g = j.at("grid");
        const auto edges = field<std::vector<double>>(g, "edges", "mixing grid");
        if (g.contains("masses")) return MixingLaw::grid_from_masses(edges, field<std::vector<double>>(g, "masses", "mixing grid"));
        return MixingLaw::grid(edges, field<std::vector<double>>(g, "density", "mixing grid"));
    }
    throw InputError("mixing: expected \"atoms\" or \"grid\"");
}

Json descriptor_to_json(const MgpDescriptor& d) {
    Json j;
    j["schema"] = schema_version;
    j["kind"] = "mgd";
    j["t0"] = d.t0;
    j["x0"] = d.x0;
    j["rates"] = rates_to_json(d.rates);
    j["maturities"] = d.maturities;
    j["mixing"] = mixing_to_json(d.mixing);
    j["variance"] = d.increments;
    if (d.theta_lo != 0.0 || std::isfinite(d.theta_hi)) j["theta_range"] = {d.theta_lo, d.theta_hi};
    return j;
}

MgpDescriptor descriptor_from_json(const Json& j) {
    check_schema(j, "descriptor");
    MgpDescriptor d;
    d.t0 = field_or<double>(j, "t0", 0.0, "descriptor");
    d.x0 = field<double>(j, "x0", "descriptor");
    if (j.contains("rates")) d.rates = rates_from_json(j.at("rates"));
    d.maturities = field<std::vector<double>>(j, "maturities", "descriptor");
    if (!j.contains("mixing")) throw InputError("descriptor: missing field \"mixing\"");
    d.mixing = mixing_from_json(j.at("mixing"));
    d.increments = field<std::vector<std::vector<double>>>(j, "variance", "descriptor");
    if (j.contains("theta_range")) {
        const auto r = field<std::vector<double>>(j, "theta_range", "descriptor");
        require(r.size() == 2, "descriptor: theta_range needs two entries");
        d.theta_lo = r[0];
        d.theta_hi = r[1];
    }
    d.validate();
    return d;
}

Json diagnostics_to_json(const InversionDiagnostics& d) {
    Json j;
    j["method"] = d.method;
    j["talbot_nodes"] = d.talbot_nodes;
    j["clipped_mass"] = d.clipped_mass;
    j["renormalization"] = d.renormalization;
    j["cdf_repair"] = d.cdf_repair;
    j["fit_degree"] = d.fit_degree;
    j["fit_error"] = d.fit_error;
    j["right_poles"] = d.right_poles;
    j["transform_residual"] = d.transform_residual;
    j["refit"] = d.refit;
    j["contour_failure"] = d.contour_failure;
    j["support_refinements"] = d.support_refinements;
    j["continuation_rank"] = d.continuation_rank;
    j["monotone_screen"] = {{"pass", d.screen.pass}, {"order", d.screen.order}, {"eta", d.screen.eta}, {"value", d.screen.value}};
    return j;
}

namespace {

InversionDiagnostics diagnostics_from_json(const Json& j) {
    InversionDiagnostics d;
    if (!j.is_object()) return d;
    const std::string w = "diagnostics";
    d.method = field_or<std::string>(j, "method", "", w);
    d.talbot_nodes = field_or<int>(j, "talbot_nodes", 0, w);
    d.clipped_mass = field_or<double>(j, "clipped_mass", 0.0, w);
    d.renormalization = field_or<double>(j, "renormalization", 1.0, w);
    d.cdf_repair = field_or<double>(j, "cdf_repair", 0.0, w);
    d.fit_degree = field_or<std::size_t>(j, "fit_degree", 0, w);
    d.fit_error = field_or<double>(j, "fit_error", 0.0, w);
    d.right_poles = field_or<std::size_t>(j, "right_poles", 0, w);
    d.transform_residual = field_or<double>(j, "transform_residual", 0.0, w);
    d.refit = field_or<bool>(j, "refit", false, w);
    d.contour_failure = field_or<std::string>(j, "contour_failure", "", w);
    d.support_refinements = field_or<std::size_t>(j, "support_refinements", 0, w);
    d.continuation_rank = field_or<std::size_t>(j, "continuation_rank", 0, w);
    if (j.contains("monotone_screen")) {
        const Json& s = j.at("monotone_screen");
        d.screen.pass = field_or<bool>(s, "pass", true, w);
        d.screen.order = field_or<int>(s, "order", -1, w);
        d.screen.eta = field_or<double>(s, "eta", 0.0, w);
        d.screen.value = field_or<double>(s, "value", 0.0, w);
    }
    return d;
}

} // namespace

Json coupling_to_json(const VarianceCoupling& f) {
    Json j;
    Json cells = Json::array();
    for (std::size_t i = 0; i < f.n; ++i)
        for (std::size_t k = i; k < f.n; ++k)
            if (f.at(i, k) > 0.0) cells.push_back({i, k, f.at(i, k)});
    j["cells"] = cells;
    j["residuals"] = {{"rows", f.residual_rows}, {"columns", f.residual_columns}, {"diagonals", f.residual_diagonals}};
    j["sweeps"] = f.sweeps;
    j["converged"] = f.converged;
    return j;
}

VarianceCoupling coupling_from_json(const Json& j, std::size_t n, double h) {
    VarianceCoupling f;
    f.n = n;
    f.h = h;
    f.mass.assign(n * n, 0.0);
    const Json& cells = j.is_object() && j.contains("cells") ? j.at("cells") : j;
    if (!cells.is_array()) throw InputError("coupling: expected a list of [i, j, mass] cells");
    for (const auto& c : cells) {
        if (!c.is_array() || c.size() != 3) throw InputError("coupling: each cell is [i, j, mass]");
        const auto i = c[0].get<std::size_t>(), k = c[1].get<std::size_t>();
        const double m = c[2].get<double>();
        require(i < n && k < n && k >= i, "coupling: cell index outside the upper triangle");
        require(m >= 0.0 && std::isfinite(m), "coupling: masses must be nonnegative");
        f.mass[i * n + k] = m;
    }
    if (j.is_object()) {
        if (j.contains("residuals")) {
            const Json& r = j.at("residuals");
            f.residual_rows = field_or<double>(r, "rows", 0.0, "coupling");
            f.residual_columns = field_or<double>(r, "columns", 0.0, "coupling");
            f.residual_diagonals = field_or<double>(r, "diagonals", 0.0, "coupling");
        }
        f.sweeps = field_or<std::size_t>(j, "sweeps", 0, "coupling");
        f.converged = field_or<bool>(j, "converged", true, "coupling");
    }
    return f;
}

Json hier_to_json(const HierarchicalModel& m) {
    Json j;
    j["schema"] = schema_version;
    j["kind"] = "hierarchical";
    j["maturities"] = m.maturities;
    j["x0"] = m.x0;
    j["rates"] = rates_to_json(m.rates);
    j["v0"] = m.v0;
    j["lattice"] = {{"n", m.n}, {"h", m.h}};
    Json layers = Json::array();
    for (std::size_t k = 0; k < m.couplings.size(); ++k) {
        Json layer;
        layer["coupling"] = coupling_to_json(m.couplings[k]);
        if (k < m.marginals.size()) {
            const VarianceMarginals& vm = m.marginals[k];
            layer["total"] = vm.total;
            layer["increment"] = vm.increment;
            layer["total_diagnostics"] = diagnostics_to_json(vm.total_diagnostics);
            layer["increment_diagnostics"] = diagnostics_to_json(vm.increment_diagnostics);
        }
        layers.push_back(layer);
    }
    j["layers"] = layers;
    Json spot = Json::array(), ratio = Json::array();
    for (const auto& s : m.spot_targets) spot.push_back(slice_to_json(s));
    for (const auto& s : m.ratio_targets) ratio.push_back(slice_to_json(s));
    j["spot_targets"] = spot;
    j["ratio_targets"] = ratio;
    return j;
}

HierarchicalModel hier_from_json(const Json& j) {
    check_schema(j, "hierarchical model");
    const std::string w = "hierarchical model";
    HierarchicalModel m;
    m.maturities = field<std::vector<double>>(j, "maturities", w);
    m.x0 = field<double>(j, "x0", w);
    if (j.contains("rates")) m.rates = rates_from_json(j.at("rates"));
    m.v0 = field_or<double>(j, "v0", 0.0, w);
    if (!j.contains("lattice")) throw InputError(w + ": missing field \"lattice\"");
    m.n = field<std::size_t>(j.at("lattice"), "n", w);
    m.h = field<double>(j.at("lattice"), "h", w);
    require(m.n >= 2 && m.h > 0.0, w + ": invalid lattice");
    if (!j.contains("layers") || !j.at("layers").is_array()) throw InputError(w + ": missing layer list");
    std::size_t k = 0;
    bool all_marginals = true;
    for (const auto& layer : j.at("layers")) {
        ++k;
        if (!layer.contains("coupling")) throw InputError(w + ": layer " + std::to_string(k) + " has no coupling");
        m.couplings.push_back(coupling_from_json(layer.at("coupling"), m.n, m.h));
        if (layer.contains("total") && layer.contains("increment")) {
            VarianceMarginals vm;
            vm.k = k;
            vm.h = m.h;
            vm.total = field<std::vector<double>>(layer, "total", w);
            vm.increment = field<std::vector<double>>(layer, "increment", w);
            require(vm.total.size() == m.n && vm.increment.size() == m.n, w + ": marginal size disagrees with the lattice");
            if (layer.contains("total_diagnostics")) vm.total_diagnostics = diagnostics_from_json(layer.at("total_diagnostics"));
            if (layer.contains("increment_diagnostics"))
                vm.increment_diagnostics = diagnostics_from_json(layer.at("increment_diagnostics"));
            m.marginals.push_back(std::move(vm));
        } else {
            all_marginals = false;
        }
    }
    if (!all_marginals) m.marginals.clear();
    if (j.contains("spot_targets"))
        for (const auto& s : j.at("spot_targets")) m.spot_targets.push_back(slice_from_json(s));
    if (j.contains("ratio_targets"))
        for (const auto& s : j.at("ratio_targets")) m.ratio_targets.push_back(slice_from_json(s));
    m.validate();
    return m;
}

bool is_hierarchical(const Json& j) {
    return j.is_object() && (j.value("kind", "") == "hierarchical" || j.contains("layers"));
}

PayoffSpec payoff_from_json(const Json& j) {
    const std::string w = "payoff";
    const std::string kind = field_or<std::string>(j, "kind", "european", w);
    const OptionKind option = option_from(field_or<std::string>(j, "option", "call", w));
    const double strike = field<double>(j, "strike", w);
    const double maturity = field<double>(j, "maturity", w);
    require(strike >= 0.0 && maturity > 0.0, "payoff: strike must be nonnegative and maturity positive");
    if (kind == "european") return PayoffSpec::european(option, strike, maturity);
    if (kind == "forward_start") {
        const double start = field<double>(j, "start", w);
        require(start >= 0.0 && start < maturity, "payoff: forward start needs 0 <= start < maturity");
        return PayoffSpec::forward_start(option, strike, start, maturity);
    }
    throw InputError("payoff: kind must be \"european\" or \"forward_start\", got \"" + kind + "\"");
}

Json payoff_to_json(const PayoffSpec& p) {
    Json j;
    switch (p.kind) {
    case PayoffSpec::Kind::european:
        j["kind"] = "european";
        break;
    case PayoffSpec::Kind::forward_start_ratio:
        j["kind"] = "forward_start";
        j["start"] = p.start;
        break;
    case PayoffSpec::Kind::custom:
        throw InputError("payoff: custom payoffs cannot be serialized");
    }
    j["option"] = option_name(p.option);
    j["strike"] = p.strike;
    j["maturity"] = p.maturity;
    return j;
}

std::vector<PayoffSpec> payoffs_from_json(const Json& j) {
    check_schema(j, "payoff");
    const Json& list = list_member(j, "payoffs");
    std::vector<PayoffSpec> out;
    if (list.is_array()) {
        for (const auto& p : list) out.push_back(payoff_from_json(p));
    } else {
        out.push_back(payoff_from_json(list));
    }
    require(!out.empty(), "payoff: no payoffs");
    return out;
}

Json calibration_diagnostics_to_json(const CalibrationDiagnostics& d, const std::vector<ChainDiagnostics>& chains) {
    Json j;
    j["schema"] = schema_version;
    Json per = Json::array();
    for (std::size_t k = 0; k < d.per_maturity.size(); ++k) {
        Json e = diagnostics_to_json(d.per_maturity[k]);
        if (k < chains.size()) {
            Json repairs = Json::array();
            for (const auto& r : chains[k].repairs)
                repairs.push_back({{"index", r.index}, {"strike", r.strike}, {"adjustment", r.adjustment}});
            e["chain_repairs"] = repairs;
            e["chain_max_adjustment"] = chains[k].max_adjustment;
        }
        per.push_back(e);
    }
    j["per_maturity"] = per;
    j["calendar"] = {{"violations", d.calendar_violations},
                     {"max_relative", d.calendar_max_relative},
                     {"max_pointwise", d.calendar_max_pointwise}};
    return j;
}

Json verification_to_json(const VerificationReport& r) {
    Json j;
    j["schema"] = schema_version;
    j["pass"] = r.pass;
    Json checks = Json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"k", c.k}, {"ks", c.statistic}, {"p_value", c.p_value}, {"pass", c.pass}});
    j["checks"] = checks;
    return j;
}

Json projection_report_to_json(const ProjectionReport& r) {
    Json j;
    j["schema"] = schema_version;
    j["escaped_fraction"] = r.escaped_fraction;
    j["max_ks"] = r.max_statistic;
    Json checks = Json::array();
    for (const auto& c : r.checks) checks.push_back({{"t", c.t}, {"ks", c.ks.statistic}, {"p_value", c.ks.p_value}});
    j["checks"] = checks;
    return j;
}

std::string paths_csv(const PathBatch& b) {
    std::string out;
    out.reserve(b.paths * b.times.size() * 20 + 64);
    char buf[32];
    out += "path";
    for (double t : b.times) {
        std::snprintf(buf, sizeof buf, ",t=%.10g", t);
        out += buf;
    }
    out += '\n';
    for (std::size_t p = 0; p < b.paths; ++p) {
        std::snprintf(buf, sizeof buf, "%zu", p);
        out += buf;
        for (std::size_t k = 0; k < b.times.size(); ++k) {
            std::snprintf(buf, sizeof buf, ",%.17g", b.value(p, k));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

} // namespace mixvol::io
