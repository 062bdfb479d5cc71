#pragma once

#include "mixvol/hierarchical.hpp"
#include "mixvol/mc_engine.hpp"
#include "mixvol/mgp.hpp"
#include "mixvol/projection.hpp"
#include "mixvol/recovery.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace mixvol::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* schema_version = "mixvol/1";

/// Parse errors and missing files raise InputError naming the path.
Json read_json_file(const std::string& path);
Json parse_json(const std::string& text, const std::string& what = "input");
/// Two-space indent with a trailing newline.
std::string dump(const Json& j);
void write_text_file(const std::string& path, const std::string& text);

Json rates_to_json(const RateCurve& rates);
RateCurve rates_from_json(const Json& j);

OptionChain chain_from_json(const Json& j);
Json chain_to_json(const OptionChain& chain);
/// Accepts a bare array, a single chain, or {"chains": [...]}.
std::vector<OptionChain> chains_from_json(const Json& j);
Json chains_to_json(const std::vector<OptionChain>& chains);
/// x0 from F D (all maturities must agree within 1e-6) and piecewise rates
/// from consecutive forwards.
ForwardCurve curve_from_chains(const std::vector<OptionChain>& chains);

Json slice_to_json(const RiskNeutralSlice& slice);
RiskNeutralSlice slice_from_json(const Json& j);
Json slices_to_json(const std::vector<RiskNeutralSlice>& slices);
/// Entries holding strikes are converted with chain_to_density, entries
/// holding x/pdf are read directly.
std::vector<RiskNeutralSlice> slices_from_json(const Json& j, const ChainOptions& chain_options = {});
std::string slice_csv(const RiskNeutralSlice& slice);

Json mixing_to_json(const MixingLaw& law);
MixingLaw mixing_from_json(const Json& j);
Json descriptor_to_json(const MgpDescriptor& desc);
MgpDescriptor descriptor_from_json(const Json& j);

Json coupling_to_json(const VarianceCoupling& f);
VarianceCoupling coupling_from_json(const Json& j, std::size_t n, double h);
Json hier_to_json(const HierarchicalModel& model);
HierarchicalModel hier_from_json(const Json& j);
bool is_hierarchical(const Json& j);

/// {"kind": "european" | "forward_start", "option": "call" | "put",
///  "strike", "maturity", "start"}; a file may hold {"payoffs": [...]}.
PayoffSpec payoff_from_json(const Json& j);
Json payoff_to_json(const PayoffSpec& p);
std::vector<PayoffSpec> payoffs_from_json(const Json& j);

Json diagnostics_to_json(const InversionDiagnostics& d);
Json calibration_diagnostics_to_json(const CalibrationDiagnostics& d, const std::vector<ChainDiagnostics>& chains);
Json verification_to_json(const VerificationReport& r);
Json projection_report_to_json(const ProjectionReport& r);

/// One row per path: path, then the value at each grid time.
std::string paths_csv(const PathBatch& batch);

} // namespace mixvol::io
