// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "oracles.hpp"
#include "transprompt/attention_ref.hpp"
#include "transprompt/backends.hpp"
#include "transprompt/baselines.hpp"
#include "transprompt/cli.hpp"
#include "transprompt/oracle_check.hpp"
#include "transprompt/prompt_codec.hpp"
#include "transprompt/selection.hpp"
#include "transprompt/toy_data.hpp"
#include "transprompt/workflow.hpp"

using namespace transprompt;

namespace {

// Pinned tolerances and sizes.
constexpr std::size_t kNnTrials = 1000;
constexpr double kNnScale = 1e-6;
constexpr double kNnSeconds = 10.0;
constexpr std::size_t kSelfAttnTrials = 100;
constexpr double kStrictTol = 1e-9;
constexpr double kLiteralScale = 0.05;
constexpr std::size_t kClusterFixtures = 20;
constexpr double kClusterScale = 0.05;
constexpr double kClusterTol = 1e-8;
constexpr std::size_t kClusterMaxLayers = 256;
constexpr std::size_t kSelectionSets = 200;
constexpr double kRepRelTol = 1e-12;
constexpr double kMetricTol = 1e-15;
constexpr double kToyMinAccuracy = 0.75;
constexpr double kToySeconds = 5.0;
constexpr std::size_t kUbSeeds = 20;
constexpr double kUbMargin = 0.05;
constexpr std::size_t kMetricCases = 1000;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

oracle::Vec raw(const FeatureVector& f) { return {f.values().begin(), f.values().end()}; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::string kFixtures = TP_FIXTURE_DIR;

Outcome nn_limit() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t trials = 0, agree = 0, skipped = 0;
  for (std::uint64_t seed = 1; trials < kNnTrials; ++seed) {
    const auto inst = random_instance(seed);
    std::vector<oracle::Vec> F;
    for (const auto& f : inst.ref.features()) F.push_back(raw(f));
    const auto q = raw(inst.test);
    std::vector<double> sims;
    for (const auto& f : F) sims.push_back(oracle::cosine(f, q));
    std::sort(sims.rbegin(), sims.rend());
    if (sims[0] - sims[1] < tie_margin(kNnScale)) {
      ++skipped;
      continue;
    }
    ++trials;
    agree += argmax(nn_attention_classify(inst.ref, inst.test, kNnScale)) ==
             inst.ref.label(oracle::nearest(F, q)).index;
  }
  const double secs = seconds_since(t0);
  return {agree == trials && secs < kNnSeconds,
          fmt::format("{}/{} agree with cosine 1-NN at s={} ({} near-ties skipped), {:.3f} s", agree,
                      trials, kNnScale, skipped, secs)};
}

Outcome self_attention_equivalence() {
  double worst = 0.0;
  std::size_t literal_trials = 0, literal_agree = 0;
  for (std::uint64_t seed = 1; seed <= kSelfAttnTrials; ++seed) {
    const auto inst = random_instance(seed);
    const FeatureLabelMatrix M(inst.ref, inst.test);
    const auto setup1 = nn_attention_classify(inst.ref, inst.test, kNnScale);
    const auto strict = self_attention_classify(M, kNnScale, Setup2Mode::Strict);
    for (std::size_t c = 0; c < setup1.size(); ++c) worst = std::max(worst, std::abs(setup1[c] - strict[c]));

    const auto soft = nn_attention_classify(inst.ref, inst.test, kLiteralScale);
    auto sorted = soft;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] - sorted[1] < 1e-9) continue;
    ++literal_trials;
    literal_agree += argmax(self_attention_classify(M, kLiteralScale, Setup2Mode::Literal)) == argmax(soft);
  }
  return {worst <= kStrictTol && literal_agree == literal_trials && literal_trials > 0,
          fmt::format("strict max |diff| = {:.2e} over {} instances; literal argmax {}/{} at s={}", worst,
                      kSelfAttnTrials, literal_agree, literal_trials, kLiteralScale)};
}

Outcome clustering_convergence() {
  AttentionConfig cfg;
  cfg.scale_s = kClusterScale;
  cfg.convergence_tol = kClusterTol;
  cfg.max_layers = kClusterMaxLayers;
  std::size_t ok = 0, worst_layer = 0;
  for (std::uint64_t seed = 0; seed < kClusterFixtures; ++seed) {
    const auto M = two_cluster_fixture(5, seed);
    const auto res = iterate_self_attention(M, cfg);
    if (!res.converged_at) continue;
    worst_layer = std::max(worst_layer, *res.converged_at);
    const auto& last = res.layers.back();
    double intra = 0, inter = INFINITY;
    for (Eigen::Index i = 0; i < last.rows(); ++i)
      for (Eigen::Index j = i + 1; j < last.rows(); ++j) {
        const double d = (last.row(i) - last.row(j)).norm();
        if ((i < 5) == (j < 5))
          intra = std::max(intra, d);
        else
          inter = std::min(inter, d);
      }
    ok += *res.converged_at <= kClusterMaxLayers && intra < inter;
  }
  return {ok == kClusterFixtures,
          fmt::format("{}/{} fixtures converged (tol {}) and separated; max converged_at {}", ok,
                      kClusterFixtures, kClusterTol, worst_layer)};
}

Outcome selection_oracle() {
  std::mt19937_64 rng(2024);
  std::size_t rep_ok = 0, plan_ok = 0;
  for (std::size_t t = 0; t < kSelectionSets; ++t) {
    const std::size_t m = 3 + rng() % 48, d = 2 + rng() % 10, C = 2 + rng() % 4;
    std::vector<oracle::Vec> F;
    std::vector<FeatureVector> feats;
    std::vector<std::size_t> y;
    std::vector<ClassLabel> labels;
    for (std::size_t i = 0; i < m; ++i) {
      F.push_back(oracle::gaussian_vec(rng, d));
      feats.emplace_back(F.back());
      y.push_back(rng() % C);
      labels.push_back({y.back()});
    }
    const ReferenceSet ref(feats, labels, C);
    const auto rep = representativeness(feats);
    const auto want = oracle::representativeness(F);
    bool same = true;
    for (std::size_t i = 0; i < m; ++i)
      same = same && std::abs(rep[i] - want[i]) <= kRepRelTol * std::max(1.0, std::abs(want[i]));
    rep_ok += same;
    const double ratio = std::vector<double>{0.25, 0.5, 0.75, 1.0}[t % 4];
    const bool interleave = t % 2 == 1;
    plan_ok += build_plan(ref, ratio, interleave).ordered_indices == oracle::plan(F, y, C, ratio, interleave);
  }
  return {rep_ok == kSelectionSets && plan_ok == kSelectionSets,
          fmt::format("rep {}/{} within {:.0e}, plans {}/{} index-identical (global and interleaved)", rep_ok,
                      kSelectionSets, kRepRelTol, plan_ok, kSelectionSets)};
}

Outcome prompt_goldens() {
  struct Golden {
    const char* name;
    bool interleave;
    int decimals;
  };
  std::size_t golden_ok = 0, lines = 0, lines_ok = 0;
  bool counts_ok = true;
  for (const auto& g : {Golden{"binary", false, 2}, Golden{"multiclass", false, 3}, Golden{"interleaved", true, 2}}) {
    const std::string base = kFixtures + "/golden/" + g.name;
    const auto data = load_dataset(base + ".csv");
    const auto plan = build_plan(data.reference, 0.5, g.interleave);
    SerializationConfig cfg;
    cfg.decimals = g.decimals;
    const auto part1 = build_part1(data.reference, plan, cfg);
    const auto part2 = build_part2(data.test_features.at(0), cfg);
    golden_ok += part1 == slurp(base + ".part1.txt") && part2 == slurp(base + ".part2.txt");

    const auto parsed = parse_prompt(part1 + part2);
    const double half = 0.5 * std::pow(10.0, -g.decimals) + 1e-12;
    for (std::size_t n = 0; n < plan.k && n < parsed.known_labels.size(); ++n) {
      ++lines;
      const auto i = plan.ordered_indices[n];
      bool ok = parsed.known_labels[n] == data.reference.label(i).index;
      for (std::size_t j = 0; j < data.reference.dim(); ++j)
        ok = ok && std::abs(parsed.known_features[n][j] - data.reference.feature(i)[j]) <= half;
      lines_ok += ok;
    }
    counts_ok = counts_ok && parsed.known_labels.size() == plan.k;
  }
  return {golden_ok == 3 && counts_ok && lines_ok == lines && lines > 0,
          fmt::format("{}/3 fixtures byte-identical; {}/{} Part-1 lines round-trip", golden_ok, lines_ok, lines)};
}

Outcome mock_end_to_end() {
  const auto report_path = std::filesystem::temp_directory_path() / "tp_acceptance_report.json";
  std::ostringstream out, err;
  const int code = run_cli({"transprompt", "evaluate", "--val", kFixtures + "/error_detection_val.csv", "--test",
                            kFixtures + "/error_detection_test.csv", "--probability", "--class-count", "3",
                            "--backend", "mock", "--mock-fixture", kFixtures + "/error_detection_mock.json",
                            "--report", report_path.string()},
                           out, err);
  if (code != kExitOk) return {false, "evaluate failed: " + err.str()};
  std::ifstream in(report_path);
  const auto rep = nlohmann::json::parse(in).at("report");
  // TP=3 FP=2 FN=1 TN=4 with "prediction error" as the positive class.
  const bool confusion = rep.at("confusion") == nlohmann::json::parse("[[4,2],[1,3]]");
  const double p = rep.at("precision"), r = rep.at("recall"), f = rep.at("f_score"),
               bal = rep.at("balanced_accuracy");
  const bool ok = confusion && p == 0.6 && r == 0.75 && std::abs(f - 2.0 / 3.0) <= kMetricTol &&
                  std::abs(bal - 17.0 / 24.0) <= kMetricTol && rep.at("fallback_count") == 0;
  return {ok, fmt::format("confusion {}, precision {}, recall {}, f {:.16f}, balanced {:.16f} (= 17/24)",
                          rep.at("confusion").dump(), p, r, f, bal)};
}

Outcome toy_circles() {
  const auto t0 = std::chrono::steady_clock::now();
  ToyConfig toy;
  toy.shape = ToyShape::Circles;
  toy.n = 200;
  toy.noise = 0.05;
  toy.seed = 7;
  toy.reference_fraction = 0.5;
  const auto data = generate_toy(toy);

  RunConfig cfg;
  cfg.use_case = UseCase::AccuracyImprovement;
  cfg.selection_ratio = 1.0;
  cfg.probability_features = false;
  cfg.serialization.decimals = toy.decimals;
  cfg.serialization.token_budget = 100000;
  LocalAttentionBackend local(AttentionConfig{});
  const auto res = run_evaluation(data, cfg, &local);

  std::vector<oracle::Vec> F;
  for (const auto& f : data.reference.features()) F.push_back(raw(f));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.test_features.size(); ++i)
    hits += data.reference.label(oracle::nearest(F, raw(data.test_features[i]))).index == (*data.test_labels)[i].index;
  const double nn_acc = static_cast<double>(hits) / data.test_features.size();
  const double secs = seconds_since(t0);
  return {res.report.accuracy == nn_acc && res.report.accuracy > kToyMinAccuracy && secs < kToySeconds,
          fmt::format("local accuracy {:.4f}, cosine 1-NN {:.4f}, {} fallbacks, {:.3f} s (ratio 1.0, seed 7)",
                      res.report.accuracy, nn_acc, res.report.fallback_count, secs)};
}

Outcome ubknn_imbalance() {
  constexpr std::size_t kMajority = 200, kMinority = 20, kMinorityTest = 100;
  const KnnConfig knn{5, Metric::Cosine};
  double knn_recall = 0, ub_recall = 0;
  for (std::uint64_t seed = 0; seed < kUbSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<FeatureVector> f;
    std::vector<ClassLabel> y;
    // Blobs centred at (3, 1) and (1, 3), unit variance.
    auto blob = [&](double cx, double cy) {
      std::normal_distribution<double> g(0.0, 1.0);
      return FeatureVector{cx + g(rng), cy + g(rng)};
    };
    for (std::size_t i = 0; i < kMajority; ++i) {
      f.push_back(blob(3, 1));
      y.push_back({0});
    }
    for (std::size_t i = 0; i < kMinority; ++i) {
      f.push_back(blob(1, 3));
      y.push_back({1});
    }
    const ReferenceSet ref(f, y, 2);
    std::size_t k_hits = 0, u_hits = 0;
    for (std::size_t i = 0; i < kMinorityTest; ++i) {
      const auto q = blob(1, 3);
      k_hits += knn_classify(ref, q, knn).index == 1;
      u_hits += ubknn_classify(ref, q, {knn, 11, seed}).index == 1;
    }
    knn_recall += static_cast<double>(k_hits) / kMinorityTest / kUbSeeds;
    ub_recall += static_cast<double>(u_hits) / kMinorityTest / kUbSeeds;
  }
  return {ub_recall >= knn_recall + kUbMargin,
          fmt::format("mean minority recall ubknn {:.4f} vs knn {:.4f} (margin {:.4f}, need {})", ub_recall,
                      knn_recall, ub_recall - knn_recall, kUbMargin)};
}

Outcome metrics_consistency() {
  std::mt19937_64 rng(99);
  std::size_t ok = 0;
  for (std::size_t t = 0; t < kMetricCases; ++t) {
    const std::size_t C = 2 + rng() % 5, n = 1 + rng() % 60;
    std::vector<std::size_t> pred, truth;
    std::vector<ClassLabel> p, y;
    for (std::size_t i = 0; i < n; ++i) {
      pred.push_back(rng() % C);
      truth.push_back(rng() % C);
      p.push_back({pred.back()});
      y.push_back({truth.back()});
    }
    const auto r = compute_metrics(p, y, C);
    const auto m = oracle::metrics(pred, truth, C, 1);
    bool same = r.confusion == m.confusion && r.n_test == n;
    double mean = 0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < C; ++c) {
      if (std::isnan(m.recall[c])) {
        same = same && !r.per_class_accuracy[c];
        continue;
      }
      same = same && r.per_class_accuracy[c] && *r.per_class_accuracy[c] == m.recall[c];
      mean += *r.per_class_accuracy[c];
      ++defined;
    }
    same = same && std::abs(r.balanced_accuracy - mean / defined) <= kMetricTol &&
           std::abs(r.balanced_accuracy - m.balanced) <= kMetricTol;
    if (C == 2) same = same && *r.precision == m.precision && *r.recall == m.rec && *r.f_score == m.f;
    ok += same;
  }
  return {ok == kMetricCases, fmt::format("{}/{} randomized cases match the independent calculation", ok, kMetricCases)};
}

class ScriptedTransport final : public HttpTransport {
public:
  ScriptedTransport(std::deque<int> statuses, std::shared_ptr<VirtualClock> clock)
      : statuses_(std::move(statuses)), clock_(std::move(clock)) {}
  HttpResult post(const std::string&, const std::vector<std::pair<std::string, std::string>>&,
                  const std::string&) override {
    times.push_back(clock_->now_ms());
    const int status = statuses_.empty() ? 200 : statuses_.front();
    if (!statuses_.empty()) statuses_.pop_front();
    return {status, status == 200 ? R"({"choices":[{"text":" 1"}]})" : ""};
  }
  std::vector<std::int64_t> times;

private:
  std::deque<int> statuses_;
  std::shared_ptr<VirtualClock> clock_;
};

class JunkBackend final : public CompletionBackend {
public:
  CompletionResponse complete(const CompletionRequest& req) override {
    max_tokens.push_back(req.max_tokens);
    return {"??", 0, "junk", {}};
  }
  std::string id() const override { return "junk"; }
  std::vector<std::size_t> max_tokens;
};

Outcome backend_robustness() {
  ::setenv("TP_ACCEPTANCE_KEY", "sk-acceptance", 1);
  BackendConfig cfg;
  cfg.kind = BackendKind::Remote;
  cfg.endpoint_url = "https://example.invalid/v1/completions";
  cfg.api_key_env = "TP_ACCEPTANCE_KEY";
  cfg.retry = {5, 300};
  cfg.rate_limit_rpm = 1000;

  // Retries: four transient failures then success.
  auto clock = std::make_shared<VirtualClock>();
  auto transport = std::make_shared<ScriptedTransport>(std::deque<int>{500, 429, 0, 503}, clock);
  RemoteBackend retrying(cfg, transport, clock);
  const bool answered = retrying.complete({"p"}).text == " 1";
  const bool schedule = clock->sleeps() == std::vector<std::int64_t>{300, 600, 1200, 2400} &&
                        transport->times.size() == 5;

  // Rate limit: 3 per minute, 20 back-to-back requests.
  auto rl_clock = std::make_shared<VirtualClock>();
  auto rl_transport = std::make_shared<ScriptedTransport>(std::deque<int>{}, rl_clock);
  cfg.rate_limit_rpm = 3;
  RemoteBackend limited(cfg, rl_transport, rl_clock);
  for (int i = 0; i < 20; ++i) limited.complete({"p"});
  std::size_t worst_window = 0;
  for (auto t0 : rl_transport->times) {
    std::size_t n = 0;
    for (auto t : rl_transport->times) n += t >= t0 && t < t0 + 60'000;
    worst_window = std::max(worst_window, n);
  }

  // Re-ask once, then fall back to 1-NN.
  ReferenceSet ref({FeatureVector{0.9, 0.1}, FeatureVector{0.2, 0.8}, FeatureVector{0.6, 0.4}, FeatureVector{0.3, 0.7}},
                   {{0}, {1}, {0}, {1}}, 2);
  std::vector<FeatureVector> tests{FeatureVector{0.25, 0.75}, FeatureVector{0.85, 0.15}, FeatureVector{0.5, 0.5}};
  std::vector<ClassLabel> truth{{1}, {0}, {0}};
  RunConfig run;
  run.use_case = UseCase::AccuracyImprovement;
  run.selection_ratio = 1.0;
  JunkBackend junk;
  const auto res = run_accuracy_improvement(ref.features(), ref.labels(), tests, truth, 2, run, &junk);
  bool fallback_ok = res.report.fallback_count == tests.size() && junk.max_tokens.size() == 2 * tests.size();
  for (std::size_t i = 0; i < tests.size(); ++i) {
    fallback_ok = fallback_ok && junk.max_tokens[2 * i] == 4 && junk.max_tokens[2 * i + 1] == 8;
    std::vector<oracle::Vec> F;
    for (auto j : res.run.plan.ordered_indices) F.push_back(raw(ref.feature(j)));
    const auto nn = res.run.plan.ordered_indices[oracle::nearest(F, raw(tests[i]))];
    fallback_ok = fallback_ok && res.run.records[i].prediction == ref.label(nn) && res.run.records[i].audit->fallback;
  }

  return {answered && schedule && worst_window <= 3 && fallback_ok,
          fmt::format("5 attempts with sleeps [300, 600, 1200, 2400] ms: {}; max {} requests per 60 s at rpm 3; "
                      "{} fallbacks after {} asks for {} samples",
                      answered && schedule, worst_window, res.report.fallback_count, junk.max_tokens.size(),
                      tests.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"attention-nn-limit", nn_limit},
      {"self-attention-equivalence", self_attention_equivalence},
      {"clustering-convergence", clustering_convergence},
      {"selection-oracle", selection_oracle},
      {"prompt-goldens", prompt_goldens},
      {"mock-end-to-end", mock_end_to_end},
      {"toy-circles-local", toy_circles},
      {"ubknn-imbalance", ubknn_imbalance},
      {"metrics-consistency", metrics_consistency},
      {"backend-robustness", backend_robustness},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << '\n';
  }
  std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures;
}
