#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "transprompt/backends.hpp"
#include "transprompt/baselines.hpp"
#include "transprompt/core_model.hpp"
#include "transprompt/prompt_codec.hpp"
#include "transprompt/selection.hpp"

namespace transprompt {

struct EvalReport {
  std::size_t class_count = 0;
  /// confusion[truth][prediction]
  std::vector<std::vector<std::size_t>> confusion;
  /// Per-class recall; empty for a class with no test samples.
  std::vector<std::optional<double>> per_class_accuracy;
  /// Binary tasks only, with respect to positive_class.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f_score;
  std::optional<std::size_t> positive_class;
  /// Mean of the defined per-class recalls.
  double balanced_accuracy = 0.0;
  double accuracy = 0.0;
  std::size_t fallback_count = 0;
  std::size_t n_test = 0;
};

EvalReport compute_metrics(std::span<const ClassLabel> predictions,
                           std::span<const ClassLabel> truths, std::size_t class_count,
                           ClassLabel positive_class = {1});

nlohmann::json to_json(const EvalReport& report);

enum class UseCase { ErrorDetection, AccuracyImprovement };
enum class Method { Transductive, Knn, UbKnn };

UseCase use_case_from_string(std::string_view name);
Method method_from_string(std::string_view name);
const char* to_string(UseCase use_case) noexcept;
const char* to_string(Method method) noexcept;

struct RunConfig {
  UseCase use_case = UseCase::ErrorDetection;
  Method method = Method::Transductive;
  double selection_ratio = 0.25;
  /// Unset: off for error detection, on for accuracy improvement.
  std::optional<bool> interleave;
  BackendConfig backend;
  SerializationConfig serialization;
  /// For binary reports. In error detection, class 1 is "prediction error".
  ClassLabel positive_class{1};
  /// When false, features are arbitrary vectors (no simplex check and no
  /// raw-argmax base report).
  bool probability_features = true;
  CompletionRequest request;
  KnnConfig knn;
  UbKnnConfig ubknn;

  bool interleaved() const { return interleave.value_or(use_case == UseCase::AccuracyImprovement); }
};

struct SampleRecord {
  std::size_t index = 0;
  ClassLabel prediction;
  std::optional<ClassLabel> truth;
  /// Present for the transductive method.
  std::optional<ClassifyAudit> audit;
};

struct InferenceRun {
  SelectionPlan plan;
  std::vector<SampleRecord> records;
  std::size_t fallback_count = 0;
};

/// Classifies every test sample against `ref`. The selection plan depends only
/// on the reference set, so it is built once and shared by all samples.
/// `backend` is required for the transductive method and ignored otherwise.
InferenceRun infer(const ReferenceSet& ref, std::span<const FeatureVector> tests,
                   const RunConfig& cfg, CompletionBackend* backend);

struct RunResult {
  EvalReport report;
  /// Raw argmax of the base classifier (accuracy improvement only).
  std::optional<EvalReport> base_report;
  InferenceRun run;
};

/// Use case 1: references are labelled 1 when the base classifier's argmax is
/// wrong; each test probability vector is classified as error / correct and
/// scored against argmax(test_prob) != test_true.
RunResult run_error_detection(std::span<const FeatureVector> val_probs,
                              std::span<const ClassLabel> val_true,
                              std::span<const FeatureVector> test_probs,
                              std::span<const ClassLabel> test_true, const RunConfig& cfg,
                              CompletionBackend* backend);

/// Use case 2: references carry the true classes; each test probability vector
/// is re-labelled into one of the C classes.
RunResult run_accuracy_improvement(std::span<const FeatureVector> val_probs,
                                   std::span<const ClassLabel> val_true,
                                   std::span<const FeatureVector> test_probs,
                                   std::span<const ClassLabel> test_true, std::size_t class_count,
                                   const RunConfig& cfg, CompletionBackend* backend);

/// Dispatches on cfg.use_case; test labels are required.
RunResult run_evaluation(const LabeledDataset& data, const RunConfig& cfg,
                         CompletionBackend* backend);

}  // namespace transprompt
