#pragma once

#include <cstddef>
#include <cstdint>

#include "transprompt/core_model.hpp"

namespace transprompt {

enum class Metric { Cosine, Euclidean };

struct KnnConfig {
  std::size_t k_neighbors = 5;
  Metric metric = Metric::Cosine;
};

struct UbKnnConfig {
  KnnConfig base;
  std::size_t n_bags = 11;
  std::uint64_t seed = 0;
};

/// Majority vote over the k nearest references. Equal distances keep the
/// lower reference index; vote ties go to the smaller class index.
ClassLabel knn_classify(const ReferenceSet& ref, const FeatureVector& f_test, const KnnConfig& cfg);

/// UnderBagging KNN: each bag undersamples every class (without replacement) to
/// the minority-class size and votes with knn_classify; bags then vote. Bag b
/// draws from a generator seeded with seed + b. Every class must be non-empty.
ClassLabel ubknn_classify(const ReferenceSet& ref, const FeatureVector& f_test,
                          const UbKnnConfig& cfg);

}  // namespace transprompt
