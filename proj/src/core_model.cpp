#include "transprompt/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "transprompt/errors.hpp"

namespace transprompt {

FeatureVector::FeatureVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw_contract("feature vector must be non-empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorKind::Validation, fmt::format("feature value {} is not finite", i));
    }
  }
}

FeatureVector::FeatureVector(std::initializer_list<double> values)
    : FeatureVector(std::vector<double>(values)) {}

double FeatureVector::norm() const noexcept {
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  return std::sqrt(sq);
}

bool FeatureVector::is_probability(double tol) const noexcept {
  double sum = 0.0;
  for (double v : values_) {
    if (v < 0.0 || v > 1.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

void FeatureVector::require_probability(double tol) const {
  if (!is_probability(tol)) {
    const double sum = std::accumulate(values_.begin(), values_.end(), 0.0);
    throw Error(ErrorKind::Validation,
                fmt::format("not a probability vector (sum={:.6g}, entries must lie in [0,1])", sum));
  }
}

std::size_t FeatureVector::argmax() const noexcept {
  return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
}

ReferenceSet::ReferenceSet(std::vector<FeatureVector> features, std::vector<ClassLabel> labels,
                           std::size_t class_count)
    : features_(std::move(features)), labels_(std::move(labels)), class_count_(class_count) {
  if (features_.empty()) throw_contract("reference set must contain at least one sample");
  if (features_.size() != labels_.size()) {
    throw_contract(fmt::format("reference set has {} features but {} labels", features_.size(),
                               labels_.size()));
  }
  if (class_count_ < 2) throw_contract("class count must be at least 2");
  const std::size_t d = features_.front().dim();
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].dim() != d) {
      throw_contract(fmt::format("reference {} has dimension {}, expected {}", i,
                                 features_[i].dim(), d));
    }
    if (labels_[i].index >= class_count_) {
      throw Error(ErrorKind::Schema, fmt::format("reference {} has label {} but class count is {}",
                                                 i, labels_[i].index, class_count_));
    }
  }
}

std::vector<std::size_t> ReferenceSet::class_sizes() const {
  std::vector<std::size_t> sizes(class_count_, 0);
  for (auto l : labels_) ++sizes[l.index];
  return sizes;
}

std::vector<std::size_t> ReferenceSet::empty_classes() const {
  std::vector<std::size_t> out;
  const auto sizes = class_sizes();
  for (std::size_t c = 0; c < sizes.size(); ++c)
    if (sizes[c] == 0) out.push_back(c);
  return out;
}

std::vector<std::size_t> ReferenceSet::members_of(std::size_t c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i].index == c) out.push_back(i);
  return out;
}

std::vector<double> ReferenceSet::one_hot(std::size_t i) const {
  std::vector<double> y(class_count_, 0.0);
  y[labels_.at(i).index] = 1.0;
  return y;
}

LabeledDataset::LabeledDataset(ReferenceSet ref, std::vector<FeatureVector> test,
                               std::optional<std::vector<ClassLabel>> labels)
    : reference(std::move(ref)), test_features(std::move(test)), test_labels(std::move(labels)) {
  for (std::size_t i = 0; i < test_features.size(); ++i) {
    if (test_features[i].dim() != reference.dim()) {
      throw_contract(fmt::format("test sample {} has dimension {}, reference dimension is {}", i,
                                 test_features[i].dim(), reference.dim()));
    }
  }
  if (test_labels) {
    if (test_labels->size() != test_features.size()) {
      throw_contract("test labels must match test features in length");
    }
    for (std::size_t i = 0; i < test_labels->size(); ++i) {
      if ((*test_labels)[i].index >= reference.class_count()) {
        throw Error(ErrorKind::Schema, fmt::format("test sample {} has label {} but class count is {}",
                                                   i, (*test_labels)[i].index,
                                                   reference.class_count()));
      }
    }
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_real(const std::string& cell, std::size_t row) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (cell.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw ParseError(row, fmt::format("row {}: '{}' is not a finite number", row, cell));
  }
  return v;
}

std::size_t parse_label(const std::string& cell, std::size_t row) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw ParseError(row, fmt::format("row {}: label '{}' is not a non-negative integer", row, cell));
  }
  return v;
}

Split parse_split(const std::string& cell, std::size_t row) {
  if (cell == "val") return Split::Val;
  if (cell == "test") return Split::Test;
  throw ParseError(row, fmt::format("row {}: split '{}' must be 'val' or 'test'", row, cell));
}

struct RawRow {
  std::vector<double> features;
  std::optional<std::size_t> label;
  Split split;
  std::size_t row;
};

LabeledDataset assemble(std::vector<RawRow> rows, const IngestSchema& schema,
                        std::optional<std::size_t> declared_classes) {
  std::size_t max_label = 0;
  for (const auto& r : rows)
    if (r.label) max_label = std::max(max_label, *r.label);
  const std::size_t class_count =
      schema.class_count.value_or(declared_classes.value_or(std::max<std::size_t>(2, max_label + 1)));

  std::vector<FeatureVector> ref_f, test_f;
  std::vector<ClassLabel> ref_y, test_y;
  bool all_test_labeled = true;
  for (auto& r : rows) {
    if (r.label && *r.label >= class_count) {
      throw Error(ErrorKind::Schema, fmt::format("row {}: label {} exceeds class count {}", r.row,
                                                 *r.label, class_count));
    }
    FeatureVector f(std::move(r.features));
    if (schema.is_probability) {
      try {
        f.require_probability();
      } catch (const Error& e) {
        throw Error(ErrorKind::Validation, fmt::format("row {}: {}", r.row, e.what()));
      }
    }
    if (r.split == Split::Val) {
      if (!r.label) {
        throw ParseError(r.row, fmt::format("row {}: validation rows need a label", r.row));
      }
      ref_f.push_back(std::move(f));
      ref_y.push_back({*r.label});
    } else {
      test_f.push_back(std::move(f));
      if (r.label)
        test_y.push_back({*r.label});
      else
        all_test_labeled = false;
    }
  }
  if (ref_f.empty()) throw Error(ErrorKind::Schema, "dataset has no validation (reference) rows");
  std::optional<std::vector<ClassLabel>> labels;
  if (all_test_labeled) labels = std::move(test_y);
  return LabeledDataset(ReferenceSet(std::move(ref_f), std::move(ref_y), class_count),
                        std::move(test_f), std::move(labels));
}

}  // namespace

namespace {

std::vector<RawRow> read_rows_csv(std::istream& in, const IngestSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty file: header row required");
  const auto header = split_csv_line(line);

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;

  std::vector<std::size_t> feature_idx;
  if (schema.feature_columns.empty()) {
    for (std::size_t j = 0;; ++j) {
      auto it = column.find(fmt::format("f{}", j));
      if (it == column.end()) break;
      feature_idx.push_back(it->second);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      auto it = column.find(name);
      if (it == column.end()) throw ParseError(1, fmt::format("header lacks column '{}'", name));
      feature_idx.push_back(it->second);
    }
  }
  if (feature_idx.empty()) throw ParseError(1, "header has no feature columns (f0, f1, ...)");

  auto label_it = column.find(schema.label_column);
  if (label_it == column.end()) {
    throw ParseError(1, fmt::format("header lacks column '{}'", schema.label_column));
  }
  auto split_it = column.find(schema.split_column);
  if (split_it == column.end() && !schema.default_split) {
    throw ParseError(1, fmt::format("header lacks column '{}'", schema.split_column));
  }

  std::vector<RawRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, fmt::format("row {}: expected {} fields, found {}", row, header.size(),
                                        cells.size()));
    }
    RawRow r{{}, std::nullopt, Split::Val, row};
    r.features.reserve(feature_idx.size());
    for (auto j : feature_idx) r.features.push_back(parse_real(cells[j], row));
    const auto& label_cell = cells[label_it->second];
    if (!label_cell.empty()) r.label = parse_label(label_cell, row);
    r.split = split_it != column.end() ? parse_split(cells[split_it->second], row)
                                       : *schema.default_split;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<RawRow> read_rows_json(std::istream& in, std::optional<std::size_t>& declared) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, fmt::format("invalid JSON: {}", e.what()));
  }
  std::vector<RawRow> rows;
  std::size_t row = 0;
  auto read_rows = [&](const char* key, Split split) {
    if (!doc.contains(key)) return;
    for (const auto& item : doc.at(key)) {
      ++row;
      try {
        RawRow r{item.at("features").get<std::vector<double>>(), std::nullopt, split, row};
        if (item.contains("label") && !item.at("label").is_null())
          r.label = item.at("label").get<std::size_t>();
        rows.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(row, fmt::format("{} entry {}: {}", key, row, e.what()));
      }
    }
  };
  read_rows("reference", Split::Val);
  read_rows("test", Split::Test);
  if (!rows.empty()) {
    const auto d = rows.front().features.size();
    for (const auto& r : rows)
      if (r.features.size() != d)
        throw ParseError(r.row, fmt::format("entry {}: expected {} features", r.row, d));
  }
  if (doc.contains("class_count")) declared = doc.at("class_count").get<std::size_t>();
  return rows;
}

std::vector<RawRow> read_rows_file(const std::filesystem::path& path, const IngestSchema& schema,
                                   std::optional<std::size_t>& declared) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Contract, fmt::format("cannot open '{}'", path.string()));
  if (path.extension() == ".json") return read_rows_json(in, declared);
  return read_rows_csv(in, schema);
}

}  // namespace

LabeledDataset load_dataset_csv(std::istream& in, const IngestSchema& schema) {
  return assemble(read_rows_csv(in, schema), schema, std::nullopt);
}

LabeledDataset load_dataset_json(std::istream& in, const IngestSchema& schema) {
  std::optional<std::size_t> declared;
  auto rows = read_rows_json(in, declared);
  return assemble(std::move(rows), schema, declared);
}

LabeledDataset load_dataset(const std::filesystem::path& path, const IngestSchema& schema) {
  std::optional<std::size_t> declared;
  auto rows = read_rows_file(path, schema, declared);
  return assemble(std::move(rows), schema, declared);
}

LabeledDataset load_split_files(const std::filesystem::path& val_path,
                                const std::filesystem::path& test_path, IngestSchema schema) {
  schema.default_split = Split::Val;
  std::optional<std::size_t> declared;
  auto rows = read_rows_file(val_path, schema, declared);
  for (auto& r : rows) r.split = Split::Val;
  schema.default_split = Split::Test;
  std::optional<std::size_t> declared_test;
  auto test_rows = read_rows_file(test_path, schema, declared_test);
  for (auto& r : test_rows) {
    r.split = Split::Test;
    rows.push_back(std::move(r));
  }
  if (!declared) declared = declared_test;
  return assemble(std::move(rows), schema, declared);
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& data) {
  const std::size_t d = data.reference.dim();
  for (std::size_t j = 0; j < d; ++j) out << 'f' << j << ',';
  out << "label,split\n";
  auto emit = [&](const FeatureVector& f, std::optional<ClassLabel> y, const char* split) {
    for (double v : f.values()) out << fmt::format("{},", v);
    if (y) out << y->index;
    out << ',' << split << '\n';
  };
  for (std::size_t i = 0; i < data.reference.size(); ++i)
    emit(data.reference.feature(i), data.reference.label(i), "val");
  for (std::size_t i = 0; i < data.test_features.size(); ++i) {
    std::optional<ClassLabel> y;
    if (data.test_labels) y = (*data.test_labels)[i];
    emit(data.test_features[i], y, "test");
  }
}

ReferenceSet derive_error_detection_set(std::span<const FeatureVector> reference_probs,
                                        std::span<const ClassLabel> reference_true) {
  if (reference_probs.size() != reference_true.size()) {
    throw_contract(fmt::format("{} probability vectors but {} true labels", reference_probs.size(),
                               reference_true.size()));
  }
  std::vector<ClassLabel> labels;
  labels.reserve(reference_probs.size());
  for (std::size_t i = 0; i < reference_probs.size(); ++i) {
    const bool wrong = reference_probs[i].argmax() != reference_true[i].index;
    labels.push_back({wrong ? kPredictionError : kCorrectPrediction});
  }
  return ReferenceSet({reference_probs.begin(), reference_probs.end()}, std::move(labels), 2);
}

}  // namespace transprompt
