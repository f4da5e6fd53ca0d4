#include "transprompt/oracle_check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "transprompt/attention_ref.hpp"
#include "transprompt/selection.hpp"

namespace transprompt {

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Difference between the largest and second-largest entry.
double top_gap(std::vector<double> v) {
  if (v.size() < 2) return std::numeric_limits<double>::infinity();
  std::partial_sort(v.begin(), v.begin() + 2, v.end(), std::greater<>());
  return v[0] - v[1];
}

}  // namespace

RandomInstance random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_m(5, 50), pick_d(2, 16), pick_c(2, 5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t m = pick_m(rng);
  const std::size_t d = pick_d(rng);
  const std::size_t C = pick_c(rng);
  std::uniform_int_distribution<std::size_t> pick_label(0, C - 1);

  auto draw = [&] {
    std::vector<double> v(d);
    for (auto& x : v) x = gauss(rng);
    return FeatureVector(std::move(v));
  };
  std::vector<FeatureVector> feats;
  std::vector<ClassLabel> labels;
  for (std::size_t i = 0; i < m; ++i) {
    feats.push_back(draw());
    labels.push_back({pick_label(rng)});
  }
  auto test = draw();
  return {ReferenceSet(std::move(feats), std::move(labels), C), std::move(test)};
}

std::pair<std::size_t, double> cosine_best_and_gap(const ReferenceSet& ref, const FeatureVector& f) {
  std::vector<double> sims(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) sims[i] = cosine_similarity(ref.feature(i), f);
  return {argmax(sims), top_gap(sims)};
}

double tie_margin(double s) { return 64.0 * s; }

Prop1Report run_prop1_suite(std::size_t trials, double s, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Prop1Report r;
  for (std::uint64_t draw = seed; r.trials < trials; ++draw) {
    const auto inst = random_instance(draw);
    const auto [best, gap] = cosine_best_and_gap(inst.ref, inst.test);
    if (gap < tie_margin(s)) {
      ++r.ties_skipped;
      continue;
    }
    ++r.trials;
    const auto probs = nn_attention_classify(inst.ref, inst.test, s);
    if (argmax(probs) == inst.ref.label(best).index) ++r.agreements;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Prop2Report run_prop2_suite(std::size_t trials, double s, double literal_s, std::uint64_t seed) {
  Prop2Report r;
  for (std::uint64_t draw = seed; r.strict_trials < trials; ++draw) {
    const auto inst = random_instance(draw);
    const FeatureLabelMatrix M(inst.ref, inst.test);

    const auto setup1 = nn_attention_classify(inst.ref, inst.test, s);
    const auto strict = self_attention_classify(M, s, Setup2Mode::Strict);
    for (std::size_t c = 0; c < setup1.size(); ++c) {
      r.strict_max_abs_diff = std::max(r.strict_max_abs_diff, std::abs(setup1[c] - strict[c]));
    }
    ++r.strict_trials;

    const auto setup1_soft = nn_attention_classify(inst.ref, inst.test, literal_s);
    if (top_gap(setup1_soft) < 1e-9) {
      ++r.literal_ties_skipped;
      continue;
    }
    ++r.literal_trials;
    const auto literal = self_attention_classify(M, literal_s, Setup2Mode::Literal);
    if (argmax(literal) == argmax(setup1_soft)) ++r.literal_agreements;
  }
  return r;
}

Eigen::MatrixXd two_cluster_fixture(std::size_t cluster_size, std::uint64_t seed) {
  constexpr Eigen::Index kFeatureDim = 4;
  constexpr Eigen::Index kClasses = 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.05);
  const auto n = static_cast<Eigen::Index>(2 * cluster_size);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, kFeatureDim + kClasses);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index cluster = i < static_cast<Eigen::Index>(cluster_size) ? 0 : 1;
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(kFeatureDim);
    f(cluster) = 1.0;
    // Jitter only the coordinates of the row's own cluster axis and the two
    // unused axes, keeping the clusters exactly orthogonal.
    f(cluster) += jitter(rng);
    f(2 + cluster) = jitter(rng);
    rows.row(i).head(kFeatureDim) = f / f.norm();
    rows(i, kFeatureDim + cluster) = 1.0;
  }
  return rows;
}

std::pair<double, double> cluster_distances(const Eigen::MatrixXd& rows, std::size_t cluster_size) {
  double intra = 0.0;
  double inter = std::numeric_limits<double>::infinity();
  const auto split = static_cast<Eigen::Index>(cluster_size);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j) {
      const double dist = (rows.row(i) - rows.row(j)).norm();
      if ((i < split) == (j < split))
        intra = std::max(intra, dist);
      else
        inter = std::min(inter, dist);
    }
  }
  return {intra, inter};
}

Prop3Report run_prop3_suite(std::size_t fixtures, double s, double tol, std::size_t max_layers,
                            std::uint64_t seed) {
  constexpr std::size_t kClusterSize = 5;
  Prop3Report r;
  AttentionConfig cfg;
  cfg.scale_s = s;
  cfg.convergence_tol = tol;
  cfg.max_layers = max_layers;
  for (std::size_t f = 0; f < fixtures; ++f) {
    const auto rows = two_cluster_fixture(kClusterSize, seed + f);
    const auto result = iterate_self_attention(rows, cfg);
    ++r.fixtures;
    if (result.converged_at) {
      ++r.converged;
      ++r.layer_histogram[*result.converged_at];
    }
    const auto [intra, inter] = cluster_distances(result.layers.back(), kClusterSize);
    if (intra < inter) ++r.separated;
    const bool monotone = std::is_sorted(result.step_norms.rbegin(), result.step_norms.rend());
    if (monotone) ++r.monotone;
  }
  return r;
}

nlohmann::json to_json(const Prop1Report& r) {
  return {{"trials", r.trials},
          {"agreements", r.agreements},
          {"ties_skipped", r.ties_skipped},
          {"seconds", r.seconds}};
}

nlohmann::json to_json(const Prop2Report& r) {
  return {{"strict_trials", r.strict_trials},
          {"strict_max_abs_diff", r.strict_max_abs_diff},
          {"literal_trials", r.literal_trials},
          {"literal_agreements", r.literal_agreements},
          {"literal_ties_skipped", r.literal_ties_skipped}};
}

nlohmann::json to_json(const Prop3Report& r) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [layer, count] : r.layer_histogram) hist[std::to_string(layer)] = count;
  return {{"fixtures", r.fixtures},
          {"converged", r.converged},
          {"separated", r.separated},
          {"monotone", r.monotone},
          {"converged_at_histogram", hist}};
}

}  // namespace transprompt
