#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace transprompt {

/// Ordered real-valued features of one sample, usually a classifier's output
/// probabilities. Never empty; every value finite.
class FeatureVector {
public:
  FeatureVector() = delete;
  explicit FeatureVector(std::vector<double> values);
  FeatureVector(std::initializer_list<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const noexcept;
  bool is_probability(double tol = 1e-6) const noexcept;
  /// Throws ErrorKind::Validation unless each value lies in [0,1] and the sum is 1 within tol.
  void require_probability(double tol = 1e-6) const;

  /// Index of the largest value; ties go to the lowest index.
  std::size_t argmax() const noexcept;

  bool operator==(const FeatureVector&) const = default;

private:
  std::vector<double> values_;
};

struct ClassLabel {
  std::size_t index = 0;
  auto operator<=>(const ClassLabel&) const = default;
};

/// Known (validation) samples used as references for transductive inference.
class ReferenceSet {
public:
  ReferenceSet(std::vector<FeatureVector> features, std::vector<ClassLabel> labels,
               std::size_t class_count);

  std::size_t size() const noexcept { return features_.size(); }
  std::size_t dim() const noexcept { return features_.front().dim(); }
  std::size_t class_count() const noexcept { return class_count_; }
  const std::vector<FeatureVector>& features() const noexcept { return features_; }
  const std::vector<ClassLabel>& labels() const noexcept { return labels_; }
  const FeatureVector& feature(std::size_t i) const { return features_.at(i); }
  ClassLabel label(std::size_t i) const { return labels_.at(i); }

  std::vector<std::size_t> class_sizes() const;
  /// Classes with no reference sample; permitted but callers may need to know.
  std::vector<std::size_t> empty_classes() const;
  /// Indices of the references belonging to `c`, ascending.
  std::vector<std::size_t> members_of(std::size_t c) const;
  /// One-hot encoding of label i over class_count entries.
  std::vector<double> one_hot(std::size_t i) const;

private:
  std::vector<FeatureVector> features_;
  std::vector<ClassLabel> labels_;
  std::size_t class_count_;
};

struct LabeledDataset {
  ReferenceSet reference;
  std::vector<FeatureVector> test_features;
  std::optional<std::vector<ClassLabel>> test_labels;

  LabeledDataset(ReferenceSet ref, std::vector<FeatureVector> test,
                 std::optional<std::vector<ClassLabel>> test_labels = std::nullopt);
};

enum class Split { Val, Test };

struct IngestSchema {
  /// Empty means every header column named f0, f1, ... in numeric order.
  std::vector<std::string> feature_columns;
  std::string label_column = "label";
  std::string split_column = "split";
  /// Used for rows when the file has no split column.
  std::optional<Split> default_split;
  /// Unset means max(observed label) + 1, at least 2.
  std::optional<std::size_t> class_count;
  bool is_probability = false;
};

/// Reads CSV (by default) or the JSON mirror format (".json" extension).
LabeledDataset load_dataset(const std::filesystem::path& path, const IngestSchema& schema = {});
LabeledDataset load_dataset_csv(std::istream& in, const IngestSchema& schema = {});
LabeledDataset load_dataset_json(std::istream& in, const IngestSchema& schema = {});

/// Validation rows from one file and test rows from another; each file's own
/// split column, if any, is ignored.
LabeledDataset load_split_files(const std::filesystem::path& val_path,
                                const std::filesystem::path& test_path, IngestSchema schema = {});

/// Writes the canonical CSV layout (f0..f{d-1},label,split). Values use the
/// shortest round-trip representation, so a reload reproduces every feature
/// bit-exactly.
void write_dataset_csv(std::ostream& out, const LabeledDataset& data);

/// Binary reference set for detecting base-classifier mistakes: label 1 when
/// argmax(prob) differs from the true class, 0 otherwise.
ReferenceSet derive_error_detection_set(std::span<const FeatureVector> reference_probs,
                                        std::span<const ClassLabel> reference_true);

inline constexpr std::size_t kCorrectPrediction = 0;
inline constexpr std::size_t kPredictionError = 1;

}  // namespace transprompt
