#include "transprompt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "transprompt/errors.hpp"
#include "transprompt/selection.hpp"

namespace transprompt {

namespace {

double distance(const FeatureVector& a, const FeatureVector& b, Metric metric) {
  if (metric == Metric::Cosine) return 1.0 - cosine_similarity(a, b);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq);
}

std::size_t vote(const std::vector<std::size_t>& counts) {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

ClassLabel knn_classify(const ReferenceSet& ref, const FeatureVector& f_test, const KnnConfig& cfg) {
  if (cfg.k_neighbors < 1 || cfg.k_neighbors > ref.size()) {
    throw_contract(fmt::format("k_neighbors={} must lie in [1, {}]", cfg.k_neighbors, ref.size()));
  }
  if (f_test.dim() != ref.dim()) throw_contract("test feature dimension differs from references");

  std::vector<double> dist(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) dist[i] = distance(ref.feature(i), f_test, cfg.metric);
  std::vector<std::size_t> order(ref.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  std::vector<std::size_t> counts(ref.class_count(), 0);
  for (std::size_t n = 0; n < cfg.k_neighbors; ++n) ++counts[ref.label(order[n]).index];
  return ClassLabel{vote(counts)};
}

ClassLabel ubknn_classify(const ReferenceSet& ref, const FeatureVector& f_test,
                          const UbKnnConfig& cfg) {
  if (cfg.n_bags < 1) throw_contract("n_bags must be >= 1");
  std::vector<std::vector<std::size_t>> members(ref.class_count());
  for (std::size_t c = 0; c < ref.class_count(); ++c) {
    members[c] = ref.members_of(c);
    if (members[c].empty()) {
      throw_contract(fmt::format("UnderBagging needs every class populated; class {} is empty", c));
    }
  }
  std::size_t minority = ref.size();
  for (const auto& m : members) minority = std::min(minority, m.size());

  std::vector<std::size_t> bag_votes(ref.class_count(), 0);
  for (std::size_t bag = 0; bag < cfg.n_bags; ++bag) {
    std::mt19937_64 rng(cfg.seed + bag);
    std::vector<std::size_t> chosen;
    for (const auto& m : members) {
      auto pool = m;
      std::shuffle(pool.begin(), pool.end(), rng);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(minority));
    }
    // Original order keeps distance tie-breaking consistent with plain KNN.
    std::sort(chosen.begin(), chosen.end());
    std::vector<FeatureVector> feats;
    std::vector<ClassLabel> labels;
    for (auto i : chosen) {
      feats.push_back(ref.feature(i));
      labels.push_back(ref.label(i));
    }
    const ReferenceSet balanced(std::move(feats), std::move(labels), ref.class_count());
    KnnConfig knn = cfg.base;
    knn.k_neighbors = std::min(knn.k_neighbors, balanced.size());
    ++bag_votes[knn_classify(balanced, f_test, knn).index];
  }
  return ClassLabel{vote(bag_votes)};
}

}  // namespace transprompt
