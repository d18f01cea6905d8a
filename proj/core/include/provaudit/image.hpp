#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace provaudit {

// Decoded raster: height x width x 3 (RGB) values in [0,1], row-major with
// interleaved channels.
class ImageTensor {
 public:
  static constexpr int kChannels = 3;

  ImageTensor() = default;
  // Zero-filled image. Throws ConfigError on non-positive dimensions.
  ImageTensor(int height, int width);
  // Takes ownership of `data`; validates length and the [0,1] range.
  ImageTensor(int height, int width, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return data_.empty(); }

  float at(int row, int col, int channel) const {
    return data_[index(row, col, channel)];
  }
  float& at(int row, int col, int channel) {
    return data_[index(row, col, channel)];
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t index(int row, int col, int channel) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * kChannels + channel;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

// Square working resolution. Only 64, 128 and 256 are accepted.
class CanonicalSize {
 public:
  constexpr CanonicalSize() = default;
  explicit CanonicalSize(int side);
  constexpr int side() const noexcept { return side_; }
  bool operator==(const CanonicalSize&) const = default;

 private:
  int side_ = 64;
};

inline constexpr int kMinImageSide = 8;

// Decodes an 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette) or a binary
// PPM (P6, maxval 255). Grayscale is replicated to RGB and alpha dropped.
ImageTensor decode_image(std::span<const std::uint8_t> bytes);

// Binary P6 encoding with values quantized to round(v * 255).
std::vector<std::uint8_t> encode_ppm(const ImageTensor& img);

// Center-crops to the largest centered square, then resamples bilinearly
// to size.side() x size.side().
ImageTensor preprocess(const ImageTensor& img, CanonicalSize size);

// Bilinear resampling with pixel-center alignment and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& img, int out_height,
                            int out_width);

// Circular shift: out(r, c) = in((r - dy) mod h, (c - dx) mod w).
ImageTensor shift_image(const ImageTensor& img, int dx, int dy);

// Box blur with a (2r+1)^2 uniform kernel and circular padding.
ImageTensor blur_image(const ImageTensor& img, int radius);

}  // namespace provaudit
