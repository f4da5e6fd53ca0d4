#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "transprompt/core_model.hpp"

namespace transprompt {

enum class ToyShape { Moons, Circles };

ToyShape toy_shape_from_string(std::string_view name);

struct ToyConfig {
  ToyShape shape = ToyShape::Circles;
  std::size_t n = 200;
  double noise = 0.05;
  std::uint64_t seed = 0;
  /// Inner-circle radius relative to the outer one (circles only).
  double factor = 0.5;
  /// Share of samples assigned to the reference (val) split.
  double reference_fraction = 0.5;
  /// Append a constant 1.0 coordinate. Cosine similarity ignores radius in the
  /// raw plane, so concentric circles are only separable with this lift.
  bool bias_feature = true;
  /// Coordinates are rounded to this many decimals, so the CSV and any prompt
  /// rendered with the same precision carry identical values.
  int decimals = 4;
};

/// Two interleaving half circles (moons) or two concentric circles, each point
/// perturbed by N(0, noise^2) per coordinate. Label 0 is the outer moon/circle,
/// 1 the inner. n/2 (rounded down) samples go to class 0, the rest to class 1;
/// a seeded shuffle assigns round(reference_fraction * n) of them to the
/// reference split.
LabeledDataset generate_toy(const ToyConfig& cfg);

}  // namespace transprompt
