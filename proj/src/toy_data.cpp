#include "transprompt/toy_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "transprompt/errors.hpp"

namespace transprompt {

ToyShape toy_shape_from_string(std::string_view name) {
  if (name == "moons") return ToyShape::Moons;
  if (name == "circles") return ToyShape::Circles;
  throw_contract(fmt::format("unknown toy dataset '{}' (moons, circles)", name));
}

LabeledDataset generate_toy(const ToyConfig& cfg) {
  if (cfg.n < 4) throw_contract("toy datasets need at least 4 samples");
  if (!(cfg.noise >= 0.0)) throw_contract("noise must be >= 0");
  if (!(cfg.reference_fraction > 0.0 && cfg.reference_fraction < 1.0)) {
    throw_contract("reference fraction must lie in (0, 1)");
  }
  if (cfg.decimals < 1) throw_contract("decimals must be >= 1");
  using std::numbers::pi;

  const std::size_t n_outer = cfg.n / 2;
  const std::size_t n_inner = cfg.n - n_outer;
  std::vector<std::array<double, 2>> points;
  std::vector<std::size_t> labels;
  points.reserve(cfg.n);

  if (cfg.shape == ToyShape::Circles) {
    for (std::size_t i = 0; i < n_outer; ++i) {
      const double t = 2.0 * pi * static_cast<double>(i) / static_cast<double>(n_outer);
      points.push_back({std::cos(t), std::sin(t)});
      labels.push_back(0);
    }
    for (std::size_t i = 0; i < n_inner; ++i) {
      const double t = 2.0 * pi * static_cast<double>(i) / static_cast<double>(n_inner);
      points.push_back({cfg.factor * std::cos(t), cfg.factor * std::sin(t)});
      labels.push_back(1);
    }
  } else {
    auto span_pi = [](std::size_t i, std::size_t count) {
      return count > 1 ? pi * static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
    };
    for (std::size_t i = 0; i < n_outer; ++i) {
      const double t = span_pi(i, n_outer);
      points.push_back({std::cos(t), std::sin(t)});
      labels.push_back(0);
    }
    for (std::size_t i = 0; i < n_inner; ++i) {
      const double t = span_pi(i, n_inner);
      points.push_back({1.0 - std::cos(t), 1.0 - std::sin(t) - 0.5});
      labels.push_back(1);
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, cfg.noise);
  const double scale = std::pow(10.0, cfg.decimals);
  auto round_to = [&](double v) {
    const double r = std::round(v * scale) / scale;
    return r == 0.0 ? 0.0 : r;
  };
  for (auto& p : points) {
    if (cfg.noise > 0.0) {
      p[0] += gauss(rng);
      p[1] += gauss(rng);
    }
    p[0] = round_to(p[0]);
    p[1] = round_to(p[1]);
  }

  std::vector<std::size_t> order(cfg.n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_ref = static_cast<std::size_t>(
      std::clamp<double>(std::round(cfg.reference_fraction * static_cast<double>(cfg.n)), 1.0,
                         static_cast<double>(cfg.n - 1)));

  auto feature = [&](std::size_t i) {
    std::vector<double> v{points[i][0], points[i][1]};
    if (cfg.bias_feature) v.push_back(1.0);
    return FeatureVector(std::move(v));
  };
  std::vector<FeatureVector> ref_f, test_f;
  std::vector<ClassLabel> ref_y, test_y;
  for (std::size_t r = 0; r < cfg.n; ++r) {
    const auto i = order[r];
    if (r < n_ref) {
      ref_f.push_back(feature(i));
      ref_y.push_back({labels[i]});
    } else {
      test_f.push_back(feature(i));
      test_y.push_back({labels[i]});
    }
  }
  return LabeledDataset(ReferenceSet(std::move(ref_f), std::move(ref_y), 2), std::move(test_f),
                        std::move(test_y));
}

}  // namespace transprompt
