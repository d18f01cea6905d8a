#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "provaudit/image.hpp"

namespace provaudit {

// One convolution stage: out_channels x in_channels x kernel x kernel
// weights, row-major in that order.
struct FilterLevel {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 2;
  std::vector<float> weights;

  std::span<const float> filter(int out) const {
    const std::size_t n = static_cast<std::size_t>(in_channels) * kernel * kernel;
    return std::span<const float>(weights).subspan(out * n, n);
  }
  bool operator==(const FilterLevel&) const = default;
};

// Deterministic hierarchical feature extractor standing in for a pretrained
// backbone. Fully determined by the seed and the channel schedule.
struct FilterBank {
  std::uint64_t seed = 0;
  std::vector<FilterLevel> levels;

  int total_channels() const;
  bool operator==(const FilterBank&) const = default;
};

inline constexpr std::uint64_t kDefaultFilterSeed = 42;

// Channel schedule {16, 32, 64} with 3x3 stride-2 filters over RGB input.
FilterBank build_filter_bank(std::uint64_t seed);
FilterBank build_filter_bank(std::uint64_t seed,
                             std::span<const int> channels_per_level);

// Activations of one level, stored position-major: value(y, x, c) at
// (y * width + x) * channels + c.
struct FeatureLevel {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  std::size_t positions() const noexcept {
    return static_cast<std::size_t>(height) * width;
  }
  std::span<const float> at(std::size_t position) const {
    return std::span<const float>(values).subspan(position * channels, channels);
  }
  bool operator==(const FeatureLevel&) const = default;
};

// Channel-unit-normalized activations for every level of the bank. Level l
// (1-based over the conv stages) has spatial size side / 2^l.
struct FeatureStack {
  std::vector<FeatureLevel> levels;
  bool operator==(const FeatureStack&) const = default;
};

// Per-level, per-channel nonnegative weights of the linear calibration layer.
struct CalibrationWeights {
  std::vector<std::vector<float>> per_level;

  static CalibrationWeights ones(const FilterBank& bank);
  static CalibrationWeights ones(const FeatureStack& shape);
  bool operator==(const CalibrationWeights&) const = default;
};

// Rectified conv pyramid; each level's raw output feeds the next level and
// is stored unit-normalized per spatial position (zero vectors stay zero).
FeatureStack extract_features(const ImageTensor& img, const FilterBank& bank);

// Sum over levels of the spatial mean of ||w .* (a - b)||^2.
double lpips_distance(const FeatureStack& a, const FeatureStack& b,
                      const CalibrationWeights& w);

double mse_distance(const ImageTensor& a, const ImageTensor& b);

// PSNR in dB for a peak value of 1. Zero MSE yields the infinite sentinel,
// never a floating-point infinity.
struct Psnr {
  double db = 0.0;
  bool infinite = false;

  static Psnr infinity() { return Psnr{0.0, true}; }
  bool operator==(const Psnr&) const = default;
};

Psnr psnr_from_mse(double mse);
Psnr psnr(const ImageTensor& a, const ImageTensor& b);

enum class PairLabel { kSimilar, kDissimilar };

struct StackPair {
  const FeatureStack* a;
  const FeatureStack* b;
  PairLabel label;
};

// Per-(level, channel) spatially averaged squared differences, flattened in
// level order. lpips_distance with weights w equals the dot product of this
// vector with w^2.
std::vector<double> channel_distance_terms(const FeatureStack& a,
                                           const FeatureStack& b);

// Nonnegative least squares fit of squared channel weights so that weighted
// distances approach 0 for similar pairs and 1 for dissimilar pairs.
// Projected gradient descent from zero, 500 iterations, step 1e-2.
CalibrationWeights fit_calibration_weights(std::span<const StackPair> pairs);

}  // namespace provaudit
