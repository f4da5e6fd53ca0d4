#include "transprompt/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "transprompt/errors.hpp"

namespace transprompt {

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  if (a.dim() != b.dim()) {
    throw_contract(fmt::format("cosine similarity of vectors with dimensions {} and {}", a.dim(),
                               b.dim()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorKind::Degenerate, "cosine similarity undefined for a zero-norm vector");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

AffinityMatrix::AffinityMatrix(std::span<const FeatureVector> features)
    : m_(features.size()), entries_(m_ * m_, 0.0) {
  for (std::size_t i = 0; i < m_; ++i) {
    if (features[i].norm() == 0.0) {
      throw Error(ErrorKind::Degenerate,
                  fmt::format("reference {} has zero norm; cosine similarity undefined", i));
    }
  }
  for (std::size_t i = 0; i < m_; ++i) {
    entries_[i * m_ + i] = 1.0;
    for (std::size_t j = i + 1; j < m_; ++j) {
      const double s = cosine_similarity(features[i], features[j]);
      entries_[i * m_ + j] = s;
      entries_[j * m_ + i] = s;
    }
  }
}

std::vector<double> representativeness(std::span<const FeatureVector> features) {
  if (features.empty()) throw_contract("representativeness needs at least one sample");
  const AffinityMatrix S(features);
  std::vector<double> rep(S.size(), 0.0);
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t j = 0; j < S.size(); ++j) rep[i] += S(i, j);
  return rep;
}

std::size_t selection_size(std::size_t m, double selection_ratio) {
  if (!(selection_ratio > 0.0 && selection_ratio <= 1.0)) {
    throw_contract(fmt::format("selection ratio {} outside (0, 1]", selection_ratio));
  }
  // Absorb representation error so that e.g. 0.29 * 100 yields 29.
  const auto k = static_cast<std::size_t>(std::floor(selection_ratio * static_cast<double>(m) + 1e-9));
  return std::clamp<std::size_t>(k, 1, m);
}

std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

SelectionPlan build_plan(const ReferenceSet& ref, double selection_ratio, bool interleave_by_class) {
  SelectionPlan plan;
  plan.k = selection_size(ref.size(), selection_ratio);
  plan.interleaved = interleave_by_class;

  if (!interleave_by_class) {
    plan.rep_scores = representativeness(ref.features());
    auto order = rank_descending(plan.rep_scores);
    order.resize(plan.k);
    plan.ordered_indices.assign(order.rbegin(), order.rend());
    return plan;
  }

  plan.rep_scores.assign(ref.size(), 0.0);
  std::vector<std::vector<std::size_t>> ranked(ref.class_count());
  for (std::size_t c = 0; c < ref.class_count(); ++c) {
    const auto members = ref.members_of(c);
    if (members.empty()) continue;
    std::vector<FeatureVector> feats;
    feats.reserve(members.size());
    for (auto i : members) feats.push_back(ref.feature(i));
    const auto rep = representativeness(feats);
    for (std::size_t t = 0; t < members.size(); ++t) plan.rep_scores[members[t]] = rep[t];
    for (auto t : rank_descending(rep)) ranked[c].push_back(members[t]);
  }

  std::vector<std::size_t> joined;
  joined.reserve(plan.k);
  for (std::size_t depth = 0; joined.size() < plan.k; ++depth) {
    for (std::size_t c = 0; c < ranked.size() && joined.size() < plan.k; ++c) {
      if (depth < ranked[c].size()) joined.push_back(ranked[c][depth]);
    }
  }
  plan.ordered_indices.assign(joined.rbegin(), joined.rend());
  return plan;
}

}  // namespace transprompt
