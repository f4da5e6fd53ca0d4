#pragma once

// Test-only reference computations. Nothing here calls into the library's
// numeric code: similarities, rankings, and metrics are recomputed from scratch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double cosine(const Vec& a, const Vec& b) {
  long double dot = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / (std::sqrt(aa) * std::sqrt(bb)));
}

/// O(m^2) representativeness with the self term pinned to 1.
inline Vec representativeness(const std::vector<Vec>& F) {
  Vec rep(F.size(), 0.0);
  for (std::size_t i = 0; i < F.size(); ++i)
    for (std::size_t j = 0; j < F.size(); ++j) rep[i] += i == j ? 1.0 : cosine(F[i], F[j]);
  return rep;
}

/// Descending by score, ascending index on ties, via an explicit pair sort.
inline std::vector<std::size_t> rank(const Vec& scores) {
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < scores.size(); ++i) keyed.push_back({-scores[i], i});
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (const auto& [neg, i] : keyed) out.push_back(i);
  return out;
}

inline std::size_t plan_size(std::size_t m, double ratio) {
  auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(m) + 1e-9));
  return std::clamp<std::size_t>(k, 1, m);
}

/// Plan by quotas: ceil(k/C) per class capped at class size, surplus dropped
/// from the deepest ranks (highest class first), shortfall refilled from the
/// next depth in class order; then joined depth by depth and reversed.
inline std::vector<std::size_t> plan(const std::vector<Vec>& F, const std::vector<std::size_t>& y,
                                     std::size_t C, double ratio, bool interleave) {
  const std::size_t k = plan_size(F.size(), ratio);
  if (!interleave) {
    auto r = rank(representativeness(F));
    r.resize(k);
    return {r.rbegin(), r.rend()};
  }
  std::vector<std::vector<std::size_t>> ranked(C);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<std::size_t> members;
    std::vector<Vec> feats;
    for (std::size_t i = 0; i < F.size(); ++i)
      if (y[i] == c) {
        members.push_back(i);
        feats.push_back(F[i]);
      }
    if (members.empty()) continue;
    for (auto t : rank(representativeness(feats))) ranked[c].push_back(members[t]);
  }
  std::vector<std::size_t> quota(C, 0);
  std::size_t total = 0;
  for (std::size_t c = 0; c < C; ++c) {
    quota[c] = std::min(ranked[c].size(), (k + C - 1) / C);
    total += quota[c];
  }
  while (total > k) {
    // Drop the deepest pick; among equal depth the highest class index.
    std::size_t victim = C;
    for (std::size_t c = 0; c < C; ++c)
      if (quota[c] > 0 && (victim == C || quota[c] >= quota[victim])) victim = c;
    --quota[victim];
    --total;
  }
  for (std::size_t depth = 0; total < k; ++depth)
    for (std::size_t c = 0; c < C && total < k; ++c)
      if (quota[c] == depth && depth < ranked[c].size()) {
        ++quota[c];
        ++total;
      }
  std::vector<std::size_t> joined;
  for (std::size_t depth = 0; joined.size() < k; ++depth)
    for (std::size_t c = 0; c < C; ++c)
      if (depth < quota[c]) joined.push_back(ranked[c][depth]);
  return {joined.rbegin(), joined.rend()};
}

/// Index of the most cosine-similar reference; lower index wins ties.
inline std::size_t nearest(const std::vector<Vec>& F, const Vec& q) {
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    const double s = cosine(F[i], q);
    if (s > best_sim) {
      best_sim = s;
      best = i;
    }
  }
  return best;
}

/// Exhaustive-sort KNN: sort (distance, index) pairs, vote, smaller class wins ties.
inline std::size_t knn(const std::vector<Vec>& F, const std::vector<std::size_t>& y, std::size_t C,
                       const Vec& q, std::size_t k, bool cosine_metric) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < F.size(); ++i) {
    double dist = 0;
    if (cosine_metric) {
      dist = 1.0 - cosine(F[i], q);
    } else {
      for (std::size_t j = 0; j < q.size(); ++j) dist += (F[i][j] - q[j]) * (F[i][j] - q[j]);
    }
    d.push_back({dist, i});
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> votes(C, 0);
  for (std::size_t n = 0; n < k; ++n) ++votes[y[d[n].second]];
  std::size_t best = 0;
  for (std::size_t c = 1; c < C; ++c)
    if (votes[c] > votes[best]) best = c;
  return best;
}

struct Metrics {
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<double> recall;  // NaN for absent classes
  double balanced = 0;
  double precision = 0, rec = 0, f = 0;  // binary, positive class
};

inline Metrics metrics(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                       std::size_t C, std::size_t positive) {
  Metrics m;
  m.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++m.confusion[truth[i]][pred[i]];
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t hit = 0, support = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (truth[i] == c) {
        ++support;
        if (pred[i] == c) ++hit;
      }
    m.recall.push_back(support ? static_cast<double>(hit) / support : std::nan(""));
    if (support) {
      sum += m.recall.back();
      ++n;
    }
  }
  m.balanced = sum / n;
  if (C == 2) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == positive && truth[i] == positive) ++tp;
      if (pred[i] == positive && truth[i] != positive) ++fp;
      if (pred[i] != positive && truth[i] == positive) ++fn;
    }
    m.precision = tp + fp ? tp / (tp + fp) : 0;
    m.rec = tp + fn ? tp / (tp + fn) : 0;
    m.f = tp ? 2 * tp / (2 * tp + fp + fn) : 0;
  }
  return m;
}

inline Vec gaussian_vec(std::mt19937_64& rng, std::size_t d, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> g(mean, sd);
  Vec v(d);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace oracle
