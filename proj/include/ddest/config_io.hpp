// config_io.hpp - JSON mapping of the experiment configuration
//
// Keys mirror the C++ field names. Unknown keys are rejected with ConfigError.

#pragma once

#include <string>

#include <json.hpp>

#include "ddest/harness.hpp"

namespace ddest {

nlohmann::json grid_to_json(const GridConfig& cfg);
/// Missing keys take the reference-profile values; c1 defaults to -P_afdm/(2N) and
/// c2 to 1/(20N) for the resolved N.
GridConfig grid_from_json(const nlohmann::json& j);

nlohmann::json pilot_to_json(const PilotConfig& pc);

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
/// Missing keys keep the values already in `base`.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const ExperimentConfig& base = {});

/// Applies "a.b.c=value" to a JSON object. The value is parsed as JSON and
/// falls back to a plain string. Throws ConfigError on malformed input.
void apply_override(nlohmann::json& j, const std::string& assignment);

std::vector<Real> parse_real_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);
std::vector<EstimatorKind> parse_estimator_list(const std::string& text);

}  // namespace ddest
