#pragma once

#include <string>

#include <json.hpp>

#include "bfctl/model.hpp"

namespace bfctl {

/// Model configuration file format:
///
///   {"g1": 2, "g2": 4, "r": 4, "m": 1,
///    "p": 0.6,                        // scalar broadcast or one value per g1 slot
///    "q": [1, 1],
///    "arrivals": 0.39,                // Poisson rate, a law object, or one law per slot
///    "blocked_arrivals": [[...], ...]}  // optional explicit pmf per g1 slot
///
/// A law object is {"kind": "poisson"|"geometric", "mean": x},
/// {"kind": "deterministic", "count": k} or {"kind": "explicit", "pmf": [...]}.
/// Unknown keys are rejected. Throws Error(ConfigParse) on malformed input;
/// the result is not yet validated.
ModelConfig config_from_json(const nlohmann::json& j);
ModelConfig config_from_text(const std::string& text);
ModelConfig load_config(const std::string& path);

/// Canonical form: every vector written out per slot. Reparses to an equal config.
nlohmann::json config_to_json(const ModelConfig& cfg);

nlohmann::json arrival_to_json(const ArrivalSpec& spec);

}  // namespace bfctl
