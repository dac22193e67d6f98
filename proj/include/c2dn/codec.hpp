#pragma once

// JSON encoding of configs and reports. Decoders are strict: unknown keys
// and wrong types raise Config errors whose message starts with
// "at <json-pointer>: " so callers can map them back onto source lines.

#include <string>

#include "json.hpp"

#include "c2dn/fcdae.hpp"
#include "c2dn/fitdyn.hpp"
#include "c2dn/metrics.hpp"
#include "c2dn/study.hpp"
#include "c2dn/synth.hpp"

namespace c2dn::codec {

// Ordered so that serialized reports are byte-stable.
using Json = nlohmann::ordered_json;

/// Parses text, mapping parse failures onto Config errors.
Json parse(const std::string& text);

Json to_json(const synth::DynamicsSpec& d);
Json to_json(const synth::SpeckleSpec& s);
Json to_json(const synth::DatasetConfig& c);
Json to_json(const synth::DatasetSummary& s);
Json to_json(const dae::Architecture& a);
Json to_json(const dae::TrainConfig& t);
Json to_json(const metrics::EvalOptions& o);
Json to_json(const metrics::ReliabilityReport& r);
Json to_json(const metrics::EnsembleVarianceReport& r);
Json to_json(const fit::FitResult& r);
Json to_json(const fit::SliceOptions& o);
Json to_json(const study::BootstrapScenario& s);
Json to_json(const study::StudyReport& r);

// Each decoder starts from the type's defaults; `path` is the JSON pointer
// of `j` inside the document, used in error messages.
synth::DynamicsSpec dynamics_from_json(const Json& j, const std::string& path = "");
synth::SpeckleSpec speckle_from_json(const Json& j, const std::string& path = "");
synth::DatasetConfig dataset_from_json(const Json& j, const std::string& path = "");
dae::Architecture architecture_from_json(const Json& j, const std::string& path = "");
dae::TrainConfig train_from_json(const Json& j, const std::string& path = "");
metrics::EvalOptions eval_from_json(const Json& j, const std::string& path = "");
fit::SliceOptions slice_options_from_json(const Json& j, const std::string& path = "");
study::BootstrapScenario scenario_from_json(const Json& j, const std::string& path = "");

/// "at <path>: <message>" Config error.
[[noreturn]] void fail(const std::string& path, const std::string& message);

}  // namespace c2dn::codec
