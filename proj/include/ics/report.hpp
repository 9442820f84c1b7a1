#pragma once

#include <json.hpp>

#include "ics/inference_mcmc.hpp"
#include "ics/inference_ml.hpp"
#include "ics/simulate.hpp"

namespace ics {

using Json = nlohmann::ordered_json;

/// Finite numbers as numbers, NaN and infinities as null.
Json number_or_null(double v);

Json spec_json(const ModelSpec& spec);
ModelSpec spec_from_json(const Json& j);
Json params_json(const ModelSpec& spec, const ParamVector& p);
/// Inverse of params_json; missing entries keep the family defaults.
ParamVector params_from_json(const ModelSpec& spec, const Json& j);
Json priors_json(const PriorSpec& p);
Json chain_config_json(const ChainConfig& c);

Json ml_fit_json(const MLFit& fit);
Json lrt_json(const LrtResult& r);
Json overdispersion_json(const OverdispersionReport& r);
Json delta_test_json(const DeltaTestReport& r);

Json fit_result_json(const FitResult& fit);
Json acceptance_json(const ChainResult& c);
Json diagnostics_json(const DiagnosticsReport& d);
Json paired_fit_json(const PairedFit& p);

Json summary_json(const SummaryTable& t);

}  // namespace ics
