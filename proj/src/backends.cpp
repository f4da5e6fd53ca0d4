#include "transprompt/backends.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "transprompt/errors.hpp"

namespace transprompt {

void CompletionRequest::validate() const {
  if (prompt.empty()) throw_contract("completion prompt must be non-empty");
  if (max_tokens < 1) throw_contract("max_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw_contract("temperature must be >= 0");
}

std::int64_t RetryPolicy::backoff_before(std::size_t attempt) const {
  if (attempt < 2) return 0;
  return base_backoff_ms << (attempt - 2);
}

void BackendConfig::validate() const {
  if (retry.max_attempts < 1) throw_contract("retry.max_attempts must be >= 1");
  if (retry.base_backoff_ms < 0) throw_contract("retry.base_backoff_ms must be >= 0");
  if (rate_limit_rpm < 1) throw_contract("rate limit must admit at least 1 request per minute");
  if (kind == BackendKind::Remote) {
    if (!endpoint_url || endpoint_url->empty()) throw_contract("remote backend needs an endpoint URL");
    if (api_key_env.empty()) throw_contract("remote backend needs an API key environment variable");
  }
  if (kind == BackendKind::LocalAttention) local.validate();
}

const char* to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::Remote: return "remote";
    case BackendKind::LocalAttention: return "local-attention";
    case BackendKind::Mock: return "mock";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "remote") return BackendKind::Remote;
  if (name == "local-attention" || name == "local") return BackendKind::LocalAttention;
  if (name == "mock") return BackendKind::Mock;
  throw_contract(fmt::format("unknown backend '{}' (remote, local-attention, mock)", name));
}

std::int64_t SystemClock::now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_ms(std::int64_t ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

RateLimiter::RateLimiter(std::size_t rpm, std::shared_ptr<Clock> clock)
    : rpm_(rpm), clock_(std::move(clock)) {
  if (rpm_ < 1) throw_contract("rate limit must be >= 1 request per minute");
}

void RateLimiter::acquire() {
  constexpr std::int64_t kWindowMs = 60'000;
  std::lock_guard lock(mutex_);
  auto now = clock_->now_ms();
  while (!admitted_.empty() && admitted_.front() <= now - kWindowMs) admitted_.pop_front();
  if (admitted_.size() >= rpm_) {
    clock_->sleep_ms(admitted_.front() + kWindowMs - now);
    now = clock_->now_ms();
    while (!admitted_.empty() && admitted_.front() <= now - kWindowMs) admitted_.pop_front();
  }
  admitted_.push_back(now);
}

void RequestBudget::consume() {
  auto used = used_.load();
  do {
    if (used >= limit_) {
      throw Error(ErrorKind::Transport,
                  fmt::format("request budget of {} exhausted; raise --budget to continue", limit_));
    }
  } while (!used_.compare_exchange_weak(used, used + 1));
}

RemoteBackend::RemoteBackend(BackendConfig cfg, std::shared_ptr<HttpTransport> transport,
                             std::shared_ptr<Clock> clock)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      limiter_(cfg_.rate_limit_rpm, clock_),
      budget_(cfg_.request_budget) {
  cfg_.validate();
}

CompletionResponse RemoteBackend::complete(const CompletionRequest& req) {
  req.validate();
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorKind::Credential,
                fmt::format("environment variable {} holds no API key", cfg_.api_key_env));
  }
  const nlohmann::json body = {{"model", req.model_name},
                               {"prompt", req.prompt},
                               {"max_tokens", req.max_tokens},
                               {"temperature", req.temperature}};
  const std::vector<std::pair<std::string, std::string>> headers = {
      {"Authorization", fmt::format("Bearer {}", key)}};
  const std::string payload = body.dump();

  std::string last_failure;
  for (std::size_t attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    if (attempt > 1) clock_->sleep_ms(cfg_.retry.backoff_before(attempt));
    budget_.consume();
    limiter_.acquire();
    const auto start = clock_->now_ms();
    const HttpResult res = transport_->post(*cfg_.endpoint_url, headers, payload);
    const auto latency = clock_->now_ms() - start;

    if (res.status == 401 || res.status == 403) {
      throw Error(ErrorKind::Credential,
                  fmt::format("endpoint rejected the API key (HTTP {})", res.status));
    }
    if (res.status == 200) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(res.body);
        CompletionResponse out;
        out.text = doc.at("choices").at(0).at("text").get<std::string>();
        out.latency_ms = latency;
        out.backend_id = id();
        out.raw = std::move(doc);
        return out;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Transport, fmt::format("malformed completion response: {}", e.what()));
      }
    }
    const bool transient = res.status == 0 || res.status == 429 || res.status >= 500;
    last_failure = res.status == 0 ? std::string("no response") : fmt::format("HTTP {}", res.status);
    if (!transient) {
      throw Error(ErrorKind::Transport, fmt::format("completion request failed: {}", last_failure));
    }
  }
  throw Error(ErrorKind::Transport, fmt::format("completion request failed after {} attempts: {}",
                                                cfg_.retry.max_attempts, last_failure));
}

LocalAttentionBackend::LocalAttentionBackend(AttentionConfig cfg) : cfg_(cfg) { cfg_.validate(); }

CompletionResponse LocalAttentionBackend::complete(const CompletionRequest& req) {
  req.validate();
  const ParsedPrompt parsed = parse_prompt(req.prompt);
  std::size_t class_count = 2;
  std::vector<FeatureVector> feats;
  std::vector<ClassLabel> labels;
  for (std::size_t i = 0; i < parsed.known_features.size(); ++i) {
    feats.emplace_back(parsed.known_features[i]);
    labels.push_back({parsed.known_labels[i]});
    class_count = std::max(class_count, parsed.known_labels[i] + 1);
  }
  const ReferenceSet ref(std::move(feats), std::move(labels), class_count);
  const auto probs = nn_attention_classify(ref, FeatureVector(parsed.test_feature), cfg_.scale_s);
  const auto best =
      static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());

  CompletionResponse out;
  out.text = fmt::format(" {}", best);
  out.backend_id = id();
  out.raw = {{"class_probabilities", probs}};
  return out;
}

std::string prompt_hash(std::string_view prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

MockBackend::MockBackend(std::map<std::string, std::vector<std::string>> table,
                         std::optional<std::string> fallback)
    : table_(std::move(table)), fallback_(std::move(fallback)) {
  for (const auto& [key, answers] : table_)
    if (answers.empty()) throw_contract(fmt::format("mock entry {} has no answers", key));
}

MockBackend MockBackend::from_json(const nlohmann::json& doc) {
  std::map<std::string, std::vector<std::string>> table;
  std::optional<std::string> fallback;
  try {
    if (doc.contains("responses")) {
      for (const auto& [key, value] : doc.at("responses").items()) {
        if (value.is_string())
          table[key] = {value.get<std::string>()};
        else
          table[key] = value.get<std::vector<std::string>>();
      }
    }
    if (doc.contains("default")) fallback = doc.at("default").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, fmt::format("mock fixture: {}", e.what()));
  }
  return MockBackend(std::move(table), std::move(fallback));
}

MockBackend MockBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_contract(fmt::format("cannot open mock fixture '{}'", path.string()));
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, fmt::format("mock fixture '{}': {}", path.string(), e.what()));
  }
}

CompletionResponse MockBackend::complete(const CompletionRequest& req) {
  req.validate();
  const auto key = prompt_hash(req.prompt);
  CompletionResponse out;
  out.backend_id = id();
  {
    std::lock_guard lock(mutex_);
    auto it = table_.find(key);
    if (it != table_.end()) {
      auto& pos = cursor_[key];
      out.text = it->second[std::min(pos, it->second.size() - 1)];
      ++pos;
    } else if (fallback_) {
      out.text = *fallback_;
    } else {
      throw_contract(fmt::format("mock has no scripted answer for prompt hash {}", key));
    }
  }
  out.raw = {{"prompt_hash", key}};
  return out;
}

MockBackend::MockBackend(MockBackend&& other) noexcept
    : table_(std::move(other.table_)),
      fallback_(std::move(other.fallback_)),
      cursor_(std::move(other.cursor_)) {}

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case BackendKind::Remote:
      return std::make_unique<RemoteBackend>(cfg, make_http_transport(),
                                             std::make_shared<SystemClock>());
    case BackendKind::LocalAttention:
      return std::make_unique<LocalAttentionBackend>(cfg.local);
    case BackendKind::Mock:
      if (!cfg.mock_fixture) throw_contract("mock backend needs a fixture file (--mock-fixture)");
      return std::make_unique<MockBackend>(MockBackend::from_file(*cfg.mock_fixture));
  }
  throw_contract("unknown backend kind");
}

ClassLabel nearest_planned_label(const ReferenceSet& ref, const SelectionPlan& plan,
                                 const FeatureVector& f_test) {
  if (plan.ordered_indices.empty()) throw_contract("selection plan is empty");
  std::size_t best = ref.size();
  double best_sim = -2.0;
  for (auto i : plan.ordered_indices) {
    const double sim = cosine_similarity(ref.feature(i), f_test);
    if (sim > best_sim || (sim == best_sim && i < best)) {
      best_sim = sim;
      best = i;
    }
  }
  return ref.label(best);
}

ClassifyResult classify(const ReferenceSet& ref, const FeatureVector& f_test,
                        const SelectionPlan& plan, CompletionBackend& backend,
                        const SerializationConfig& ser, const CompletionRequest& request) {
  const PromptBundle bundle = build_prompt(ref, plan, f_test, ser);
  CompletionRequest req = request;
  req.prompt = bundle.text();

  ClassifyResult result{{}, {req.prompt, {}, 0, false, backend.id()}};
  for (int ask = 0; ask < 2; ++ask) {
    const CompletionResponse resp = backend.complete(req);
    result.audit.completions.push_back(resp.text);
    try {
      result.label = parse_completion(resp.text, ref.class_count());
      result.audit.label = result.label.index;
      return result;
    } catch (const CompletionError&) {
      req.max_tokens += 4;
    }
  }
  result.label = nearest_planned_label(ref, plan, f_test);
  result.audit.label = result.label.index;
  result.audit.fallback = true;
  return result;
}

}  // namespace transprompt
