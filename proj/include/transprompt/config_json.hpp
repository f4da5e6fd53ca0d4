#pragma once

#include <json.hpp>

#include "transprompt/workflow.hpp"

namespace transprompt {

/// Overlays the keys present in `doc` onto `cfg`; absent keys keep their value.
/// Layout mirrors the config types:
///   {"use_case", "method", "selection_ratio", "interleave", "positive_class",
///    "probability_features",
///    "serialization": {"decimals", "token_budget", "chars_per_token"},
///    "request": {"max_tokens", "temperature"},
///    "backend": {"kind", "endpoint_url", "api_key_env", "rate_limit_rpm",
///                "request_budget", "model_name", "mock_fixture",
///                "retry": {"max_attempts", "base_backoff_ms"},
///                "local": {"scale_s", "layers_L", "convergence_tol", "max_layers"}},
///    "knn": {"k_neighbors", "metric"}, "ubknn": {"n_bags", "seed"}}
void apply_config_json(const nlohmann::json& doc, RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace transprompt
