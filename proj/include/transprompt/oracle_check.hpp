#pragma once

#include <cstddef>
#include <cstdint>
#include <map>

#include <json.hpp>

#include "transprompt/attention_ref.hpp"
#include "transprompt/core_model.hpp"

namespace transprompt {

/// Random reference set + test feature with m in [5,50], d in [2,16], C in [2,5],
/// Gaussian features. Used by the property suites and tests.
struct RandomInstance {
  ReferenceSet ref;
  FeatureVector test;
};

RandomInstance random_instance(std::uint64_t seed);

/// Cosine similarities of the test feature to each reference, sorted
/// descending; returns (best index, gap to the runner-up).
std::pair<std::size_t, double> cosine_best_and_gap(const ReferenceSet& ref, const FeatureVector& f);

/// Minimal top-1/top-2 cosine gap for a Setup-1 instance to count as untied at
/// scale s: beyond it the runner-ups together weigh less than e^-60.
double tie_margin(double s);

struct Prop1Report {
  std::size_t trials = 0;
  std::size_t agreements = 0;
  std::size_t ties_skipped = 0;
  double seconds = 0.0;
};

/// Attention-as-NN: argmax of nn_attention_classify vs cosine 1-NN on
/// `trials` untied random instances.
Prop1Report run_prop1_suite(std::size_t trials, double s, std::uint64_t seed);

struct Prop2Report {
  std::size_t strict_trials = 0;
  double strict_max_abs_diff = 0.0;
  std::size_t literal_trials = 0;
  std::size_t literal_agreements = 0;
  std::size_t literal_ties_skipped = 0;
};

/// Setup 2 vs Setup 1: elementwise difference in strict mode at scale s, and
/// argmax agreement in literal mode at scale literal_s.
Prop2Report run_prop2_suite(std::size_t trials, double s, double literal_s, std::uint64_t seed);

struct Prop3Report {
  std::size_t fixtures = 0;
  std::size_t converged = 0;
  std::size_t separated = 0;
  std::size_t monotone = 0;
  /// converged_at -> count
  std::map<std::size_t, std::size_t> layer_histogram;
};

/// Two orthogonal clusters of `cluster_size` rows each ([unit feature | one-hot
/// label], features jittered around e0 and e1 of a 4-d space).
Eigen::MatrixXd two_cluster_fixture(std::size_t cluster_size, std::uint64_t seed);

/// Largest distance between rows of the same cluster and smallest distance
/// between rows of different clusters (first `cluster_size` rows form cluster A).
std::pair<double, double> cluster_distances(const Eigen::MatrixXd& rows, std::size_t cluster_size);

Prop3Report run_prop3_suite(std::size_t fixtures, double s, double tol, std::size_t max_layers,
                            std::uint64_t seed);

nlohmann::json to_json(const Prop1Report& r);
nlohmann::json to_json(const Prop2Report& r);
nlohmann::json to_json(const Prop3Report& r);

}  // namespace transprompt
