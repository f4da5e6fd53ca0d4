#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "transprompt/core_model.hpp"

namespace transprompt {

/// Cosine similarity a.b / (|a||b|). Throws ErrorKind::Degenerate on a zero-norm vector.
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

/// Dense m x m cosine affinity, row-major.
class AffinityMatrix {
public:
  explicit AffinityMatrix(std::span<const FeatureVector> features);

  std::size_t size() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * m_ + j]; }

private:
  std::size_t m_;
  std::vector<double> entries_;
};

/// rep_i = sum_j S[i][j], self term included. Summation runs j = 0..m-1 in order.
std::vector<double> representativeness(std::span<const FeatureVector> features);

struct SelectionPlan {
  /// Reference indices in prompt order: the last entry is emitted last and is
  /// the most representative pick.
  std::vector<std::size_t> ordered_indices;
  /// Representativeness of every reference sample (per class when interleaved).
  std::vector<double> rep_scores;
  std::size_t k = 0;
  bool interleaved = false;
};

/// k = max(1, floor(ratio * m)).
std::size_t selection_size(std::size_t m, double selection_ratio);

/// Indices sorted by descending score; equal scores keep ascending index order.
std::vector<std::size_t> rank_descending(std::span<const double> scores);

/// Picks the k most representative references and orders them so the top pick
/// comes last. With `interleave_by_class`, representativeness and ranking are
/// computed inside each class and the classes are joined round-robin (class
/// index order, best first) before the whole sequence is reversed. A class that
/// runs out of members is skipped, so the plan always holds exactly k samples.
SelectionPlan build_plan(const ReferenceSet& ref, double selection_ratio, bool interleave_by_class);

}  // namespace transprompt
