#include "mixvol/errors.hpp"
#include "mixvol/io.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace mixvol;
using io::Json;

namespace {

/// Black-Scholes chain with flat rate r and variance rate s2.
OptionChain bs_chain(double t, double r, double s2, double x0 = 100.0) {
    OptionChain c;
    c.maturity = t;
    c.discount = std::exp(-r * t);
    c.forward = x0 / c.discount;
    for (int i = 0; i <= 60; ++i) {
        const double k = c.forward * std::exp(4.0 * std::sqrt(s2 * t) * (i / 30.0 - 1.0));
        c.strikes.push_back(k);
        c.calls.push_back(oracle::bs_call(c.forward, k, s2 * t, c.discount));
    }
    return c;
}

/// dump(read(dump(x))) == dump(x).
template <class To, class From>
void expect_stable(const Json& first, To to, From from) {
    const std::string a = io::dump(first);
    const std::string b = io::dump(to(from(io::parse_json(a))));
    EXPECT_EQ(a, b);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("mixvol_io_" + name)).string();
}

} // namespace

TEST(Io, DumpIsIndentedWithNewline) {
    Json j;
    j["a"] = 1;
    EXPECT_EQ(io::dump(j), "{\n  \"a\": 1\n}\n");
}

TEST(Io, RatesFromNumberOrObject) {
    const RateCurve flat = io::rates_from_json(Json(0.03));
    EXPECT_DOUBLE_EQ(flat.rate(2.0), 0.03);
    const RateCurve piecewise({0.0, 1.0}, {0.01, 0.05});
    const RateCurve back = io::rates_from_json(io::rates_to_json(piecewise));
    EXPECT_EQ(back.times(), piecewise.times());
    EXPECT_EQ(back.rates(), piecewise.rates());
}

TEST(Io, ChainFormats) {
    const OptionChain c = bs_chain(1.0, 0.02, 0.04);
    const Json single = io::chain_to_json(c);
    Json bare = Json::array();
    bare.push_back(io::chain_to_json(bs_chain(2.0, 0.02, 0.04)));
    bare.push_back(single);
    EXPECT_EQ(io::chains_from_json(single).size(), 1u);
    const std::vector<OptionChain> sorted = io::chains_from_json(bare);
    ASSERT_EQ(sorted.size(), 2u);
    EXPECT_DOUBLE_EQ(sorted[0].maturity, 1.0);
    EXPECT_EQ(io::dump(io::chains_to_json(sorted)), io::dump(io::chains_to_json(io::chains_from_json(io::chains_to_json(sorted)))));

    Json dup = Json::array({single, single});
    EXPECT_THROW(io::chains_from_json(dup), InputError);
    Json wrong = single;
    wrong["calls"].erase(0);
    EXPECT_THROW(io::chain_from_json(wrong), InputError);
    Json missing = single;
    missing.erase("forward");
    EXPECT_THROW(io::chain_from_json(missing), InputError);
    Json schema = io::chains_to_json(sorted);
    schema["schema"] = "other/9";
    EXPECT_THROW(io::chains_from_json(schema), InputError);
}

TEST(Io, CurveFromChains) {
    const ForwardCurve f = io::curve_from_chains({bs_chain(0.5, 0.01, 0.04), bs_chain(1.5, 0.01, 0.04)});
    EXPECT_NEAR(f.x0, 100.0, 1e-12);
    EXPECT_NEAR(forward(f, 1.0), 100.0 * std::exp(0.01), 1e-10);
    EXPECT_NEAR(forward(f, 1.5), 100.0 * std::exp(0.015), 1e-10);
    EXPECT_THROW(io::curve_from_chains({bs_chain(0.5, 0.01, 0.04), bs_chain(1.5, 0.01, 0.04, 101.0)}), InputError);
}

TEST(Io, SlicesFromStrikesOrDensity) {
    Json j = Json::array();
    j.push_back(io::chain_to_json(bs_chain(1.0, 0.0, 0.04)));
    const RiskNeutralSlice direct = mixture_slice(oracle::atoms({0.04}, {1.0}), 1.0);
    j.push_back(io::slice_to_json(direct));
    const std::vector<RiskNeutralSlice> s = io::slices_from_json(j);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_NEAR(slice_mean(s[0]) / 100.0 - 1.0, 0.0, 1e-3);
    EXPECT_EQ(s[1].pdf, direct.pdf);
    expect_stable(io::slice_to_json(direct), io::slice_to_json, io::slice_from_json);
    const std::string csv = io::slice_csv(direct);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), direct.x.size() + 1);
}

TEST(Io, DescriptorRoundTrip) {
    MgpDescriptor d;
    d.mixing = MixingLaw::atoms({0.1, 0.3}, {0.25, 0.75});
    d.maturities = {1.0, 2.0};
    d.increments = {{0.01, 0.02}, {0.09, 0.05}};
    d.x0 = 95.0;
    d.rates = RateCurve({0.0, 1.0}, {0.01, 0.03});
    const Json j = io::descriptor_to_json(d);
    expect_stable(j, io::descriptor_to_json, io::descriptor_from_json);
    const MgpDescriptor back = io::descriptor_from_json(j);
    EXPECT_EQ(back.maturities, d.maturities);
    EXPECT_EQ(back.increments, d.increments);
    EXPECT_DOUBLE_EQ(back.x0, 95.0);
    const EuropeanSpec e{OptionKind::call, 100.0, 2.0};
    EXPECT_EQ(price_european(back, e), price_european(d, e));

    const MgpDescriptor grid = variance_mixture_descriptor(oracle::gamma_law(2, 0.01, 64), 1.0, 100.0);
    expect_stable(io::descriptor_to_json(grid), io::descriptor_to_json, io::descriptor_from_json);
    EXPECT_FALSE(io::is_hierarchical(j));
}

TEST(Io, HierarchicalAndCouplingRoundTrip) {
    HierarchicalModel m = flat_model(0.2, {0.5, 1.0}, 100.0, RateCurve::flat(0.02), 32);
    const Json j = io::hier_to_json(m);
    EXPECT_TRUE(io::is_hierarchical(j));
    expect_stable(j, io::hier_to_json, io::hier_from_json);
    const HierarchicalModel back = io::hier_from_json(j);
    ASSERT_EQ(back.couplings.size(), m.couplings.size());
    for (std::size_t k = 0; k < m.couplings.size(); ++k) EXPECT_EQ(back.couplings[k].mass, m.couplings[k].mass);
    EXPECT_EQ(back.maturities, m.maturities);

    const VarianceCoupling& f = m.couplings[1];
    const VarianceCoupling g = io::coupling_from_json(io::coupling_to_json(f), f.n, f.h);
    EXPECT_EQ(g.mass, f.mass);
    EXPECT_EQ(io::dump(io::coupling_to_json(g)), io::dump(io::coupling_to_json(f)));
}

TEST(Io, PayoffsRoundTrip) {
    const std::vector<PayoffSpec> p{PayoffSpec::european(OptionKind::put, 90.0, 0.5),
                                    PayoffSpec::forward_start(OptionKind::call, 1.0, 0.5, 1.0)};
    Json j;
    j["payoffs"] = Json::array();
    for (const auto& x : p) j["payoffs"].push_back(io::payoff_to_json(x));
    const std::vector<PayoffSpec> back = io::payoffs_from_json(j);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].kind, PayoffSpec::Kind::forward_start_ratio);
    EXPECT_DOUBLE_EQ(back[1].start, 0.5);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(io::dump(io::payoff_to_json(back[i])), io::dump(j["payoffs"][i]));

    Json bad = j["payoffs"][1];
    bad["start"] = 2.0;
    EXPECT_THROW(io::payoff_from_json(bad), InputError);
    bad["kind"] = "barrier";
    EXPECT_THROW(io::payoff_from_json(bad), InputError);
    EXPECT_THROW(io::payoff_to_json(PayoffSpec::custom([](const double*, const std::vector<double>&) { return 0.0; }, 1.0)),
                 InputError);
}

TEST(Io, FilesAndParseErrors) {
    const std::string path = temp_path("chain.json");
    io::write_text_file(path, io::dump(io::chain_to_json(bs_chain(1.0, 0.0, 0.04))));
    EXPECT_EQ(io::chains_from_json(io::read_json_file(path)).size(), 1u);
    std::filesystem::remove(path);
    try {
        io::read_json_file(path);
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
    }
    EXPECT_THROW(io::parse_json("{\"a\": ", "snippet"), InputError);
}

TEST(Io, PathsCsvLayout) {
    PathBatch b;
    b.times = {0.0, 1.0};
    b.paths = 2;
    b.values = {100.0, 101.5, 100.0, 98.25};
    EXPECT_EQ(io::paths_csv(b), "path,t=0,t=1\n0,100,101.5\n1,100,98.25\n");
}
