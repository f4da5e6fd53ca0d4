#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "transprompt/attention_ref.hpp"
#include "transprompt/core_model.hpp"
#include "transprompt/prompt_codec.hpp"
#include "transprompt/selection.hpp"

namespace transprompt {

struct CompletionRequest {
  std::string prompt;
  std::size_t max_tokens = 4;
  double temperature = 0.0;
  std::string model_name = "text-davinci-003";

  void validate() const;
};

struct CompletionResponse {
  std::string text;
  std::int64_t latency_ms = 0;
  std::string backend_id;
  nlohmann::json raw;
};

enum class BackendKind { Remote, LocalAttention, Mock };

struct RetryPolicy {
  std::size_t max_attempts = 4;
  std::int64_t base_backoff_ms = 500;

  /// Delay before attempt `attempt` (1-based, so attempt >= 2): base * 2^(attempt-2).
  std::int64_t backoff_before(std::size_t attempt) const;
};

struct BackendConfig {
  BackendKind kind = BackendKind::LocalAttention;
  std::optional<std::string> endpoint_url;
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
  std::size_t rate_limit_rpm = 60;
  /// Hard cap on HTTP requests per run (retries included).
  std::size_t request_budget = 500;
  AttentionConfig local;
  std::optional<std::filesystem::path> mock_fixture;
  std::string model_name = "text-davinci-003";

  void validate() const;
};

const char* to_string(BackendKind kind) noexcept;
BackendKind backend_kind_from_string(std::string_view name);

/// Millisecond clock with an injectable sleep, so tests can run on virtual time.
class Clock {
public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
  virtual void sleep_ms(std::int64_t ms) = 0;
};

class SystemClock final : public Clock {
public:
  std::int64_t now_ms() override;
  void sleep_ms(std::int64_t ms) override;
};

/// Advances only when slept on; records every sleep.
class VirtualClock final : public Clock {
public:
  std::int64_t now_ms() override { return now_; }
  void sleep_ms(std::int64_t ms) override {
    sleeps_.push_back(ms);
    now_ += ms;
  }
  void advance(std::int64_t ms) { now_ += ms; }
  const std::vector<std::int64_t>& sleeps() const noexcept { return sleeps_; }

private:
  std::int64_t now_ = 0;
  std::vector<std::int64_t> sleeps_;
};

/// Admits at most `rpm` requests in any rolling 60 s window, sleeping on the
/// clock until the oldest admission leaves the window.
class RateLimiter {
public:
  RateLimiter(std::size_t rpm, std::shared_ptr<Clock> clock);
  void acquire();

private:
  std::size_t rpm_;
  std::shared_ptr<Clock> clock_;
  std::mutex mutex_;
  std::deque<std::int64_t> admitted_;
};

class RequestBudget {
public:
  explicit RequestBudget(std::size_t limit) : limit_(limit) {}
  /// Throws ErrorKind::Transport once the limit is used up.
  void consume();
  std::size_t used() const noexcept { return used_.load(); }

private:
  std::size_t limit_;
  std::atomic<std::size_t> used_{0};
};

struct HttpResult {
  /// 0 when no HTTP response arrived (connection failure, timeout).
  int status = 0;
  std::string body;
};

class HttpTransport {
public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& url,
                          const std::vector<std::pair<std::string, std::string>>& headers,
                          const std::string& body) = 0;
};

/// cpp-httplib client (HTTPS via OpenSSL).
std::shared_ptr<HttpTransport> make_http_transport();

class CompletionBackend {
public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResponse complete(const CompletionRequest& req) = 0;
  virtual std::string id() const = 0;
};

/// OpenAI-compatible /completions client: JSON {model, prompt, max_tokens,
/// temperature}, bearer key from the environment, answer at choices[0].text.
/// Retries HTTP 429, 5xx and transport failures with exponential backoff; 401
/// and 403 fail immediately as credential errors.
class RemoteBackend final : public CompletionBackend {
public:
  RemoteBackend(BackendConfig cfg, std::shared_ptr<HttpTransport> transport,
                std::shared_ptr<Clock> clock);
  CompletionResponse complete(const CompletionRequest& req) override;
  std::string id() const override { return "remote"; }
  std::size_t requests_sent() const noexcept { return budget_.used(); }

private:
  BackendConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<Clock> clock_;
  RateLimiter limiter_;
  RequestBudget budget_;
};

/// Offline stand-in for the language model: parses the prompt back into known
/// samples and a test feature, runs attention-as-nearest-neighbour, and
/// answers " <argmax class>".
class LocalAttentionBackend final : public CompletionBackend {
public:
  explicit LocalAttentionBackend(AttentionConfig cfg);
  CompletionResponse complete(const CompletionRequest& req) override;
  std::string id() const override { return "local-attention"; }

private:
  AttentionConfig cfg_;
};

/// Hex FNV-1a 64-bit digest, the key of mock fixture tables.
std::string prompt_hash(std::string_view prompt);

/// Scripted answers keyed by prompt_hash. A key maps to a list of answers
/// consumed in order, the last repeating; unknown prompts get `fallback` when set.
class MockBackend final : public CompletionBackend {
public:
  MockBackend(std::map<std::string, std::vector<std::string>> table,
              std::optional<std::string> fallback = std::nullopt);
  MockBackend(MockBackend&& other) noexcept;
  /// {"responses": {"<hash>": "text" | ["text", ...]}, "default": "text"}
  static MockBackend from_json(const nlohmann::json& doc);
  static MockBackend from_file(const std::filesystem::path& path);

  CompletionResponse complete(const CompletionRequest& req) override;
  std::string id() const override { return "mock"; }

private:
  std::map<std::string, std::vector<std::string>> table_;
  std::optional<std::string> fallback_;
  std::mutex mutex_;
  std::map<std::string, std::size_t> cursor_;
};

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& cfg);

struct ClassifyAudit {
  std::string prompt;
  std::vector<std::string> completions;
  std::size_t label = 0;
  bool fallback = false;
  std::string backend_id;
};

struct ClassifyResult {
  ClassLabel label;
  ClassifyAudit audit;
};

/// Cosine 1-NN among the plan's samples; equal similarities keep the lower reference index.
ClassLabel nearest_planned_label(const ReferenceSet& ref, const SelectionPlan& plan,
                                 const FeatureVector& f_test);

/// Builds the prompt, asks the backend, and parses the class. An unusable
/// completion is re-asked once with max_tokens + 4; a second failure falls
/// back to nearest_planned_label and marks the audit record.
ClassifyResult classify(const ReferenceSet& ref, const FeatureVector& f_test,
                        const SelectionPlan& plan, CompletionBackend& backend,
                        const SerializationConfig& ser, const CompletionRequest& request = {});

}  // namespace transprompt
