#include "transprompt/config_json.hpp"

#include <fmt/format.h>

#include "transprompt/errors.hpp"

namespace transprompt {

namespace {

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

Metric metric_from_string(const std::string& name) {
  if (name == "cosine") return Metric::Cosine;
  if (name == "euclidean") return Metric::Euclidean;
  throw_contract(fmt::format("unknown metric '{}' (cosine, euclidean)", name));
}

}  // namespace

void apply_config_json(const nlohmann::json& doc, RunConfig& cfg) {
  try {
    if (doc.contains("use_case")) cfg.use_case = use_case_from_string(doc.at("use_case").get<std::string>());
    if (doc.contains("method")) cfg.method = method_from_string(doc.at("method").get<std::string>());
    read(doc, "selection_ratio", cfg.selection_ratio);
    if (doc.contains("interleave") && !doc.at("interleave").is_null())
      cfg.interleave = doc.at("interleave").get<bool>();
    read(doc, "positive_class", cfg.positive_class.index);
    read(doc, "probability_features", cfg.probability_features);

    if (doc.contains("serialization")) {
      const auto& s = doc.at("serialization");
      read(s, "decimals", cfg.serialization.decimals);
      read(s, "token_budget", cfg.serialization.token_budget);
      read(s, "chars_per_token", cfg.serialization.chars_per_token);
    }
    if (doc.contains("request")) {
      const auto& r = doc.at("request");
      read(r, "max_tokens", cfg.request.max_tokens);
      read(r, "temperature", cfg.request.temperature);
    }
    if (doc.contains("backend")) {
      const auto& b = doc.at("backend");
      if (b.contains("kind")) cfg.backend.kind = backend_kind_from_string(b.at("kind").get<std::string>());
      if (b.contains("endpoint_url")) cfg.backend.endpoint_url = b.at("endpoint_url").get<std::string>();
      read(b, "api_key_env", cfg.backend.api_key_env);
      read(b, "rate_limit_rpm", cfg.backend.rate_limit_rpm);
      read(b, "request_budget", cfg.backend.request_budget);
      read(b, "model_name", cfg.backend.model_name);
      if (b.contains("mock_fixture"))
        cfg.backend.mock_fixture = b.at("mock_fixture").get<std::string>();
      if (b.contains("retry")) {
        read(b.at("retry"), "max_attempts", cfg.backend.retry.max_attempts);
        read(b.at("retry"), "base_backoff_ms", cfg.backend.retry.base_backoff_ms);
      }
      if (b.contains("local")) {
        const auto& l = b.at("local");
        read(l, "scale_s", cfg.backend.local.scale_s);
        read(l, "layers_L", cfg.backend.local.layers_L);
        read(l, "convergence_tol", cfg.backend.local.convergence_tol);
        read(l, "max_layers", cfg.backend.local.max_layers);
      }
    }
    if (doc.contains("knn")) {
      read(doc.at("knn"), "k_neighbors", cfg.knn.k_neighbors);
      if (doc.at("knn").contains("metric"))
        cfg.knn.metric = metric_from_string(doc.at("knn").at("metric").get<std::string>());
    }
    if (doc.contains("ubknn")) {
      read(doc.at("ubknn"), "n_bags", cfg.ubknn.n_bags);
      read(doc.at("ubknn"), "seed", cfg.ubknn.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, fmt::format("config: {}", e.what()));
  }
  cfg.ubknn.base = cfg.knn;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json backend = {
      {"kind", to_string(cfg.backend.kind)},
      {"api_key_env", cfg.backend.api_key_env},
      {"rate_limit_rpm", cfg.backend.rate_limit_rpm},
      {"request_budget", cfg.backend.request_budget},
      {"model_name", cfg.backend.model_name},
      {"retry",
       {{"max_attempts", cfg.backend.retry.max_attempts},
        {"base_backoff_ms", cfg.backend.retry.base_backoff_ms}}},
      {"local",
       {{"scale_s", cfg.backend.local.scale_s},
        {"layers_L", cfg.backend.local.layers_L},
        {"convergence_tol", cfg.backend.local.convergence_tol},
        {"max_layers", cfg.backend.local.max_layers}}}};
  if (cfg.backend.endpoint_url) backend["endpoint_url"] = *cfg.backend.endpoint_url;
  if (cfg.backend.mock_fixture) backend["mock_fixture"] = cfg.backend.mock_fixture->string();
  return {{"use_case", to_string(cfg.use_case)},
          {"method", to_string(cfg.method)},
          {"selection_ratio", cfg.selection_ratio},
          {"interleave", cfg.interleaved()},
          {"positive_class", cfg.positive_class.index},
          {"probability_features", cfg.probability_features},
          {"serialization",
           {{"decimals", cfg.serialization.decimals},
            {"token_budget", cfg.serialization.token_budget},
            {"chars_per_token", cfg.serialization.chars_per_token}}},
          {"request",
           {{"max_tokens", cfg.request.max_tokens}, {"temperature", cfg.request.temperature}}},
          {"backend", backend},
          {"knn",
           {{"k_neighbors", cfg.knn.k_neighbors},
            {"metric", cfg.knn.metric == Metric::Cosine ? "cosine" : "euclidean"}}},
          {"ubknn", {{"n_bags", cfg.ubknn.n_bags}, {"seed", cfg.ubknn.seed}}}};
}

}  // namespace transprompt
