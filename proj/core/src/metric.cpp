#include "provaudit/metric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "provaudit/error.hpp"

namespace provaudit {

namespace {

constexpr std::array<int, 3> kDefaultChannels{16, 32, 64};

// Uniform double in [-1, 1) from the top 53 bits; std distributions are not
// portable across standard libraries.
double uniform_signed(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-52 - 1.0;
}

// Orthonormalizes the rows of a rows x cols matrix in place (modified
// Gram-Schmidt, two passes). Rows beyond the column count cannot be made
// orthogonal and are only unit-normalized.
void orthonormalize_rows(std::vector<double>& m, int rows, int cols) {
  auto row = [&](int r) { return m.data() + static_cast<std::size_t>(r) * cols; };
  auto normalize = [&](double* v) {
    double ss = 0.0;
    for (int i = 0; i < cols; ++i) ss += v[i] * v[i];
    const double inv = 1.0 / std::sqrt(ss);
    for (int i = 0; i < cols; ++i) v[i] *= inv;
  };
  for (int r = 0; r < rows; ++r) {
    double* v = row(r);
    if (r < cols) {
      for (int pass = 0; pass < 2; ++pass) {
        for (int q = 0; q < r; ++q) {
          const double* u = row(q);
          double dot = 0.0;
          for (int i = 0; i < cols; ++i) dot += u[i] * v[i];
          for (int i = 0; i < cols; ++i) v[i] -= dot * u[i];
        }
      }
    }
    normalize(v);
  }
}

void check_stack_shapes(const FeatureStack& a, const FeatureStack& b) {
  if (a.levels.size() != b.levels.size()) {
    throw MetricError("feature stacks have different level counts");
  }
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    const auto& la = a.levels[l];
    const auto& lb = b.levels[l];
    if (la.channels != lb.channels || la.height != lb.height ||
        la.width != lb.width) {
      throw MetricError("feature stacks differ in shape at level " +
                        std::to_string(l));
    }
  }
}

void check_weights_shape(const FeatureStack& a, const CalibrationWeights& w) {
  if (w.per_level.size() != a.levels.size()) {
    throw MetricError("calibration weights have " +
                      std::to_string(w.per_level.size()) +
                      " levels, features have " +
                      std::to_string(a.levels.size()));
  }
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    if (static_cast<int>(w.per_level[l].size()) != a.levels[l].channels) {
      throw MetricError("calibration weights channel count mismatch at level " +
                        std::to_string(l));
    }
  }
}

// Zero-padded strided convolution followed by a rectifier. Input and output
// are position-major (y, x, c).
std::vector<float> conv_relu(const std::vector<float>& in, int h, int w,
                             const FilterLevel& level, int out_h, int out_w) {
  const int cin = level.in_channels;
  const int cout = level.out_channels;
  const int k = level.kernel;
  const int pad = k / 2;
  std::vector<float> out(static_cast<std::size_t>(out_h) * out_w * cout);
  std::vector<double> acc(cout);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * level.stride + ky - pad;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * level.stride + kx - pad;
          if (ix < 0 || ix >= w) continue;
          const float* px = in.data() + (static_cast<std::size_t>(iy) * w + ix) * cin;
          for (int o = 0; o < cout; ++o) {
            const float* f = level.weights.data() +
                             (static_cast<std::size_t>(o) * cin * k + ky) * k + kx;
            double s = 0.0;
            for (int i = 0; i < cin; ++i) s += static_cast<double>(f[i * k * k]) * px[i];
            acc[o] += s;
          }
        }
      }
      float* dst = out.data() + (static_cast<std::size_t>(oy) * out_w + ox) * cout;
      for (int o = 0; o < cout; ++o) {
        dst[o] = acc[o] > 0.0 ? static_cast<float>(acc[o]) : 0.0f;
      }
    }
  }
  return out;
}

FeatureLevel normalize_level(const std::vector<float>& raw, int channels,
                             int h, int w) {
  FeatureLevel level{channels, h, w, raw};
  for (std::size_t p = 0; p < level.positions(); ++p) {
    float* v = level.values.data() + p * channels;
    double ss = 0.0;
    for (int c = 0; c < channels; ++c) ss += static_cast<double>(v[c]) * v[c];
    if (ss == 0.0) continue;
    const double inv = 1.0 / std::sqrt(ss);
    for (int c = 0; c < channels; ++c) v[c] = static_cast<float>(v[c] * inv);
  }
  return level;
}

}  // namespace

int FilterBank::total_channels() const {
  int total = 0;
  for (const auto& l : levels) total += l.out_channels;
  return total;
}

FilterBank build_filter_bank(std::uint64_t seed) {
  return build_filter_bank(seed, kDefaultChannels);
}

FilterBank build_filter_bank(std::uint64_t seed,
                             std::span<const int> channels_per_level) {
  if (channels_per_level.empty()) {
    throw ConfigError("filter bank needs at least one level");
  }
  FilterBank bank;
  bank.seed = seed;
  std::mt19937_64 gen(seed);
  int in_channels = ImageTensor::kChannels;
  for (int out_channels : channels_per_level) {
    if (out_channels <= 0) throw ConfigError("channel counts must be positive");
    FilterLevel level;
    level.in_channels = in_channels;
    level.out_channels = out_channels;
    const int cols = in_channels * level.kernel * level.kernel;
    std::vector<double> m(static_cast<std::size_t>(out_channels) * cols);
    for (double& v : m) v = uniform_signed(gen);
    orthonormalize_rows(m, out_channels, cols);
    level.weights.assign(m.begin(), m.end());
    bank.levels.push_back(std::move(level));
    in_channels = out_channels;
  }
  return bank;
}

CalibrationWeights CalibrationWeights::ones(const FilterBank& bank) {
  CalibrationWeights w;
  for (const auto& l : bank.levels) w.per_level.emplace_back(l.out_channels, 1.0f);
  return w;
}

CalibrationWeights CalibrationWeights::ones(const FeatureStack& shape) {
  CalibrationWeights w;
  for (const auto& l : shape.levels) w.per_level.emplace_back(l.channels, 1.0f);
  return w;
}

FeatureStack extract_features(const ImageTensor& img, const FilterBank& bank) {
  if (bank.levels.empty()) throw ConfigError("filter bank has no levels");
  if (bank.levels.front().in_channels != ImageTensor::kChannels) {
    throw ConfigError("level-0 filters expect " +
                      std::to_string(bank.levels.front().in_channels) +
                      " input channels, image has 3");
  }
  if (img.height() != img.width()) {
    throw ConfigError("feature extraction requires a square canonical image");
  }
  const int divisor = 1 << bank.levels.size();
  if (img.height() % divisor != 0) {
    throw ConfigError("image side " + std::to_string(img.height()) +
                      " is not divisible by " + std::to_string(divisor));
  }

  FeatureStack stack;
  std::vector<float> input(img.data().begin(), img.data().end());
  int h = img.height();
  int w = img.width();
  int channels = ImageTensor::kChannels;
  for (const FilterLevel& level : bank.levels) {
    if (level.in_channels != channels) {
      throw ConfigError("filter bank levels are not chained consistently");
    }
    const int out_h = (h + level.stride - 1) / level.stride;
    const int out_w = (w + level.stride - 1) / level.stride;
    std::vector<float> raw = conv_relu(input, h, w, level, out_h, out_w);
    stack.levels.push_back(normalize_level(raw, level.out_channels, out_h, out_w));
    input = std::move(raw);
    h = out_h;
    w = out_w;
    channels = level.out_channels;
  }
  return stack;
}

double lpips_distance(const FeatureStack& a, const FeatureStack& b,
                      const CalibrationWeights& w) {
  check_stack_shapes(a, b);
  check_weights_shape(a, w);
  double total = 0.0;
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    const FeatureLevel& la = a.levels[l];
    const FeatureLevel& lb = b.levels[l];
    const std::vector<float>& wl = w.per_level[l];
    double level_sum = 0.0;
    for (std::size_t i = 0; i < la.values.size(); ++i) {
      const double d = wl[i % la.channels] *
                       (static_cast<double>(la.values[i]) - lb.values[i]);
      level_sum += d * d;
    }
    total += level_sum / static_cast<double>(la.positions());
  }
  return total;
}

std::vector<double> channel_distance_terms(const FeatureStack& a,
                                           const FeatureStack& b) {
  check_stack_shapes(a, b);
  std::vector<double> terms;
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    const FeatureLevel& la = a.levels[l];
    const FeatureLevel& lb = b.levels[l];
    std::vector<double> sums(la.channels, 0.0);
    for (std::size_t i = 0; i < la.values.size(); ++i) {
      const double d = static_cast<double>(la.values[i]) - lb.values[i];
      sums[i % la.channels] += d * d;
    }
    for (double s : sums) terms.push_back(s / static_cast<double>(la.positions()));
  }
  return terms;
}

double mse_distance(const ImageTensor& a, const ImageTensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw MetricError("mse requires equal dimensions");
  }
  double sum = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - db[i];
    sum += d * d;
  }
  return sum / static_cast<double>(da.size());
}

Psnr psnr_from_mse(double mse) {
  if (mse < 0.0 || !std::isfinite(mse)) throw MetricError("invalid mse value");
  if (mse == 0.0) return Psnr::infinity();
  return Psnr{10.0 * std::log10(1.0 / mse), false};
}

Psnr psnr(const ImageTensor& a, const ImageTensor& b) {
  return psnr_from_mse(mse_distance(a, b));
}

CalibrationWeights fit_calibration_weights(std::span<const StackPair> pairs) {
  constexpr int kIterations = 500;
  constexpr double kStep = 1e-2;

  if (pairs.size() < 2) {
    throw DegenerateCalibrationError("calibration needs at least two pairs");
  }
  bool has_similar = false;
  bool has_dissimilar = false;
  for (const auto& p : pairs) {
    (p.label == PairLabel::kSimilar ? has_similar : has_dissimilar) = true;
  }
  if (!has_similar || !has_dissimilar) {
    throw DegenerateCalibrationError(
        "calibration pairs must include both similar and dissimilar labels");
  }

  std::vector<std::vector<double>> terms;
  std::vector<double> targets;
  terms.reserve(pairs.size());
  for (const auto& p : pairs) {
    terms.push_back(channel_distance_terms(*p.a, *p.b));
    if (terms.back().size() != terms.front().size()) {
      throw MetricError("calibration pairs come from different filter banks");
    }
    targets.push_back(p.label == PairLabel::kSimilar ? 0.0 : 1.0);
  }

  const std::size_t dims = terms.front().size();
  const double scale = 2.0 / static_cast<double>(pairs.size());
  std::vector<double> v(dims, 0.0);  // squared channel weights
  std::vector<double> grad(dims);
  for (int it = 0; it < kIterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t p = 0; p < terms.size(); ++p) {
      double pred = 0.0;
      for (std::size_t j = 0; j < dims; ++j) pred += v[j] * terms[p][j];
      const double r = pred - targets[p];
      for (std::size_t j = 0; j < dims; ++j) grad[j] += r * terms[p][j];
    }
    for (std::size_t j = 0; j < dims; ++j) {
      v[j] = std::max(0.0, v[j] - kStep * scale * grad[j]);
    }
  }

  CalibrationWeights w;
  std::size_t j = 0;
  for (const auto& level : pairs.front().a->levels) {
    std::vector<float> lw(level.channels);
    for (float& x : lw) x = static_cast<float>(std::sqrt(v[j++]));
    w.per_level.push_back(std::move(lw));
  }
  return w;
}

}  // namespace provaudit
