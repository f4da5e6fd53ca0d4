#include "transprompt/workflow.hpp"

#include <fmt/format.h>

#include "transprompt/errors.hpp"

namespace transprompt {

EvalReport compute_metrics(std::span<const ClassLabel> predictions,
                           std::span<const ClassLabel> truths, std::size_t class_count,
                           ClassLabel positive_class) {
  if (predictions.empty()) throw_contract("metrics need at least one prediction");
  if (predictions.size() != truths.size()) {
    throw_contract(fmt::format("{} predictions but {} truths", predictions.size(), truths.size()));
  }
  if (class_count < 2) throw_contract("class count must be >= 2");

  EvalReport r;
  r.class_count = class_count;
  r.n_test = predictions.size();
  r.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].index >= class_count || truths[i].index >= class_count) {
      throw_contract(fmt::format("sample {} names a class outside [0, {})", i, class_count));
    }
    ++r.confusion[truths[i].index][predictions[i].index];
  }

  std::size_t correct = 0;
  double recall_sum = 0.0;
  std::size_t defined = 0;
  r.per_class_accuracy.resize(class_count);
  for (std::size_t c = 0; c < class_count; ++c) {
    std::size_t support = 0;
    for (auto n : r.confusion[c]) support += n;
    correct += r.confusion[c][c];
    if (support == 0) continue;
    const double recall = static_cast<double>(r.confusion[c][c]) / static_cast<double>(support);
    r.per_class_accuracy[c] = recall;
    recall_sum += recall;
    ++defined;
  }
  r.balanced_accuracy = recall_sum / static_cast<double>(defined);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_test);

  if (class_count == 2) {
    if (positive_class.index > 1) throw_contract("positive class must be 0 or 1");
    const std::size_t p = positive_class.index;
    const std::size_t n = 1 - p;
    const auto tp = static_cast<double>(r.confusion[p][p]);
    const auto fp = static_cast<double>(r.confusion[n][p]);
    const auto fn = static_cast<double>(r.confusion[p][n]);
    r.positive_class = p;
    r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    // Harmonic mean of precision and recall, in count form.
    r.f_score = tp > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
  }
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& a : r.per_class_accuracy) {
    per_class.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  }
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"class_count", r.class_count},
          {"n_test", r.n_test},
          {"confusion", r.confusion},
          {"per_class_accuracy", per_class},
          {"precision", opt(r.precision)},
          {"recall", opt(r.recall)},
          {"f_score", opt(r.f_score)},
          {"positive_class", opt(r.positive_class)},
          {"balanced_accuracy", r.balanced_accuracy},
          {"accuracy", r.accuracy},
          {"fallback_count", r.fallback_count}};
}

UseCase use_case_from_string(std::string_view name) {
  if (name == "error_detection") return UseCase::ErrorDetection;
  if (name == "accuracy_improvement") return UseCase::AccuracyImprovement;
  throw_contract(fmt::format("unknown use case '{}' (error_detection, accuracy_improvement)", name));
}

Method method_from_string(std::string_view name) {
  if (name == "gpt4mia" || name == "transductive") return Method::Transductive;
  if (name == "knn") return Method::Knn;
  if (name == "ubknn") return Method::UbKnn;
  throw_contract(fmt::format("unknown method '{}' (gpt4mia, knn, ubknn)", name));
}

const char* to_string(UseCase use_case) noexcept {
  return use_case == UseCase::ErrorDetection ? "error_detection" : "accuracy_improvement";
}

const char* to_string(Method method) noexcept {
  switch (method) {
    case Method::Transductive: return "gpt4mia";
    case Method::Knn: return "knn";
    case Method::UbKnn: return "ubknn";
  }
  return "unknown";
}

InferenceRun infer(const ReferenceSet& ref, std::span<const FeatureVector> tests,
                   const RunConfig& cfg, CompletionBackend* backend) {
  InferenceRun run;
  run.plan = build_plan(ref, cfg.selection_ratio, cfg.interleaved());
  if (cfg.method == Method::Transductive && backend == nullptr) {
    throw_contract("the transductive method needs a completion backend");
  }
  CompletionRequest request = cfg.request;
  request.model_name = cfg.backend.model_name;

  run.records.reserve(tests.size());
  for (std::size_t i = 0; i < tests.size(); ++i) {
    SampleRecord rec;
    rec.index = i;
    switch (cfg.method) {
      case Method::Transductive: {
        auto result = classify(ref, tests[i], run.plan, *backend, cfg.serialization, request);
        rec.prediction = result.label;
        if (result.audit.fallback) ++run.fallback_count;
        rec.audit = std::move(result.audit);
        break;
      }
      case Method::Knn: rec.prediction = knn_classify(ref, tests[i], cfg.knn); break;
      case Method::UbKnn: rec.prediction = ubknn_classify(ref, tests[i], cfg.ubknn); break;
    }
    run.records.push_back(std::move(rec));
  }
  return run;
}

namespace {

void require_probabilities(std::span<const FeatureVector> probs, const char* which) {
  for (std::size_t i = 0; i < probs.size(); ++i) {
    try {
      probs[i].require_probability();
    } catch (const Error& e) {
      throw Error(ErrorKind::Validation, fmt::format("{} sample {}: {}", which, i, e.what()));
    }
  }
}

RunResult score(InferenceRun run, std::vector<ClassLabel> truths, std::size_t class_count,
                ClassLabel positive_class) {
  std::vector<ClassLabel> preds;
  preds.reserve(run.records.size());
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    run.records[i].truth = truths[i];
    preds.push_back(run.records[i].prediction);
  }
  RunResult out{compute_metrics(preds, truths, class_count, positive_class), std::nullopt,
                std::move(run)};
  out.report.fallback_count = out.run.fallback_count;
  return out;
}

}  // namespace

RunResult run_error_detection(std::span<const FeatureVector> val_probs,
                              std::span<const ClassLabel> val_true,
                              std::span<const FeatureVector> test_probs,
                              std::span<const ClassLabel> test_true, const RunConfig& cfg,
                              CompletionBackend* backend) {
  if (test_probs.size() != test_true.size()) throw_contract("test probabilities and labels differ in length");
  require_probabilities(val_probs, "validation");
  require_probabilities(test_probs, "test");
  const ReferenceSet ref = derive_error_detection_set(val_probs, val_true);

  std::vector<ClassLabel> truths;
  truths.reserve(test_probs.size());
  for (std::size_t i = 0; i < test_probs.size(); ++i) {
    if (test_probs[i].dim() != ref.dim()) throw_contract("test and validation dimensions differ");
    truths.push_back({test_probs[i].argmax() != test_true[i].index ? kPredictionError
                                                                    : kCorrectPrediction});
  }
  return score(infer(ref, test_probs, cfg, backend), std::move(truths), 2, cfg.positive_class);
}

RunResult run_accuracy_improvement(std::span<const FeatureVector> val_probs,
                                   std::span<const ClassLabel> val_true,
                                   std::span<const FeatureVector> test_probs,
                                   std::span<const ClassLabel> test_true, std::size_t class_count,
                                   const RunConfig& cfg, CompletionBackend* backend) {
  if (test_probs.size() != test_true.size()) throw_contract("test probabilities and labels differ in length");
  if (cfg.probability_features) {
    require_probabilities(val_probs, "validation");
    require_probabilities(test_probs, "test");
  }
  const ReferenceSet ref({val_probs.begin(), val_probs.end()}, {val_true.begin(), val_true.end()},
                         class_count);

  const std::vector<ClassLabel> truths(test_true.begin(), test_true.end());
  RunResult out = score(infer(ref, test_probs, cfg, backend), truths, class_count, cfg.positive_class);
  if (cfg.probability_features) {
    std::vector<ClassLabel> base_preds;
    base_preds.reserve(test_probs.size());
    for (const auto& p : test_probs) base_preds.push_back({p.argmax()});
    out.base_report = compute_metrics(base_preds, truths, class_count, cfg.positive_class);
  }
  return out;
}

RunResult run_evaluation(const LabeledDataset& data, const RunConfig& cfg,
                         CompletionBackend* backend) {
  if (!data.test_labels) throw_contract("evaluation needs labels on every test row");
  const auto& ref = data.reference;
  if (cfg.use_case == UseCase::ErrorDetection) {
    return run_error_detection(ref.features(), ref.labels(), data.test_features, *data.test_labels,
                               cfg, backend);
  }
  return run_accuracy_improvement(ref.features(), ref.labels(), data.test_features,
                                   *data.test_labels, ref.class_count(), cfg, backend);
}

}  // namespace transprompt
