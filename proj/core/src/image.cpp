#include "provaudit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

#include "provaudit/error.hpp"

namespace provaudit {

ImageTensor::ImageTensor(int height, int width)
    : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw ConfigError("image dimensions must be positive, got " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(height) * width * kChannels, 0.0f);
}

ImageTensor::ImageTensor(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height <= 0 || width <= 0) {
    throw ConfigError("image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * kChannels) {
    throw ConfigError("image data length " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(height) + "x" +
                      std::to_string(width) + "x3");
  }
  for (float v : data_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ConfigError("image value outside [0,1]");
    }
  }
}

CanonicalSize::CanonicalSize(int side) : side_(side) {
  if (side != 64 && side != 128 && side != 256) {
    throw ConfigError("canonical size must be 64, 128 or 256, got " +
                      std::to_string(side));
  }
}

namespace {


float sample_value(std::uint8_t n) { return static_cast<float>(n) / 255.0f; }

// ---------------------------------------------------------------------------
// PPM (P6)

class PpmReader {
 public:
  explicit PpmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  ImageTensor read() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '6') {
      throw DecodeError("not a binary PPM (expected magic P6)", 0);
    }
    pos_ = 2;
    const std::uint64_t width = read_header_int("width");
    const std::uint64_t height = read_header_int("height");
    const std::uint64_t maxval = read_header_int("maxval");
    if (width == 0 || height == 0) {
      throw DecodeError("PPM has zero dimension", pos_);
    }
    if (maxval > 255) {
      throw UnsupportedFormatError("PPM maxval " + std::to_string(maxval) +
                                   " exceeds 8-bit samples");
    }
    if (maxval != 255) {
      throw UnsupportedFormatError("PPM maxval must be 255, got " +
                                   std::to_string(maxval));
    }
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw DecodeError("missing whitespace after PPM maxval", pos_);
    }
    ++pos_;
    const std::uint64_t need = width * height * 3;
    if (width > (1u << 20) || height > (1u << 20) ||
        bytes_.size() - pos_ < need) {
      throw DecodeError("PPM pixel data truncated: need " +
                            std::to_string(need) + " bytes",
                        bytes_.size());
    }
    std::vector<float> data(need);
    for (std::uint64_t i = 0; i < need; ++i) {
      data[i] = sample_value(bytes_[pos_ + i]);
    }
    return ImageTensor(static_cast<int>(height), static_cast<int>(width),
                       std::move(data));
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = static_cast<unsigned char>(bytes_[pos_]);
      if (std::isspace(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::uint64_t read_header_int(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() &&
           std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1ull << 32)) {
        throw DecodeError(std::string("PPM ") + field + " out of range", start);
      }
      ++pos_;
    }
    if (pos_ == start) {
      throw DecodeError(std::string("malformed PPM header: expected ") + field,
                        start);
    }
    return value;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// PNG via libpng. Errors longjmp back into decode_png, so that function keeps
// only trivially destructible locals alive across setjmp.

struct PngSource {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
  char message[256];
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->size - src->pos < count) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, src->data + src->pos, count);
  src->pos += count;
}

void png_on_error(png_structp png, png_const_charp msg) {
  auto* src = static_cast<PngSource*>(png_get_error_ptr(png));
  std::snprintf(src->message, sizeof(src->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_on_warning(png_structp, png_const_charp) {}

enum class PngStatus { kOk, kDecodeError, kDeepSamples };

struct PngRaster {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  std::vector<std::uint8_t> rgb;
};

PngStatus decode_png_raw(PngSource* src, PngRaster* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, src,
                                           png_on_error, png_on_warning);
  if (png == nullptr) return PngStatus::kDecodeError;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return PngStatus::kDecodeError;
  }
  png_bytep* volatile rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] rows;
    png_destroy_read_struct(&png, &info, nullptr);
    return PngStatus::kDecodeError;
  }
  png_set_read_fn(png, src, png_read_from_memory);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth > 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    return PngStatus::kDeepSamples;
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(out->width) * 3) {
    png_error(png, "unexpected row layout after transforms");
  }
  out->rgb.resize(static_cast<std::size_t>(out->width) * out->height * 3);
  rows = new png_bytep[out->height];
  for (png_uint_32 r = 0; r < out->height; ++r) {
    rows[r] = out->rgb.data() + static_cast<std::size_t>(r) * out->width * 3;
  }
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  delete[] rows;
  png_destroy_read_struct(&png, &info, nullptr);
  return PngStatus::kOk;
}

ImageTensor decode_png(std::span<const std::uint8_t> bytes) {
  PngSource src{bytes.data(), bytes.size(), 0, {0}};
  PngRaster raster;
  switch (decode_png_raw(&src, &raster)) {
    case PngStatus::kDeepSamples:
      throw UnsupportedFormatError("PNG bit depth above 8 is not supported");
    case PngStatus::kDecodeError:
      throw DecodeError(std::string("malformed PNG: ") + src.message, src.pos);
    case PngStatus::kOk:
      break;
  }
  if (raster.width > (1u << 20) || raster.height > (1u << 20)) {
    throw DecodeError("PNG dimensions out of range", 16);
  }
  std::vector<float> data(raster.rgb.size());
  std::transform(raster.rgb.begin(), raster.rgb.end(), data.begin(),
                 sample_value);
  return ImageTensor(static_cast<int>(raster.height),
                     static_cast<int>(raster.width), std::move(data));
}

bool has_png_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

}  // namespace

ImageTensor decode_image(std::span<const std::uint8_t> bytes) {
  if (has_png_signature(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return PpmReader(bytes).read();
  throw DecodeError("unrecognized image header (expected PNG or P6 PPM)", 0);
}

std::vector<std::uint8_t> encode_ppm(const ImageTensor& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.data().size());
  for (float v : img.data()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
  }
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_height,
                            int out_width) {
  if (out_height == img.height() && out_width == img.width()) return img;
  ImageTensor out(out_height, out_width);
  const double sy = static_cast<double>(img.height()) / out_height;
  const double sx = static_cast<double>(img.width()) / out_width;
  const int max_r = img.height() - 1;
  const int max_c = img.width() - 1;
  for (int r = 0; r < out_height; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(max_r));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, max_r);
    const double wy = fy - y0;
    for (int c = 0; c < out_width; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(max_c));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, max_c);
      const double wx = fx - x0;
      for (int ch = 0; ch < ImageTensor::kChannels; ++ch) {
        const double top = img.at(y0, x0, ch) * (1.0 - wx) + img.at(y0, x1, ch) * wx;
        const double bot = img.at(y1, x0, ch) * (1.0 - wx) + img.at(y1, x1, ch) * wx;
        const double v = top * (1.0 - wy) + bot * wy;
        out.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

ImageTensor preprocess(const ImageTensor& img, CanonicalSize size) {
  if (img.height() < kMinImageSide || img.width() < kMinImageSide) {
    throw TooSmallError("image " + std::to_string(img.width()) + "x" +
                        std::to_string(img.height()) +
                        " is smaller than the 8x8 minimum");
  }
  const int side = std::min(img.height(), img.width());
  const int top = (img.height() - side) / 2;
  const int left = (img.width() - side) / 2;
  if (top == 0 && left == 0) return resize_bilinear(img, size.side(), size.side());

  ImageTensor crop(side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      for (int ch = 0; ch < ImageTensor::kChannels; ++ch) {
        crop.at(r, c, ch) = img.at(top + r, left + c, ch);
      }
    }
  }
  return resize_bilinear(crop, size.side(), size.side());
}

namespace {

int wrap(int v, int n) {
  const int m = v % n;
  return m < 0 ? m + n : m;
}

}  // namespace

ImageTensor shift_image(const ImageTensor& img, int dx, int dy) {
  const int h = img.height();
  const int w = img.width();
  if (std::abs(dx) >= w || std::abs(dy) >= h) {
    throw ConfigError("shift must satisfy |dx| < width and |dy| < height");
  }
  ImageTensor out(h, w);
  for (int r = 0; r < h; ++r) {
    const int sr = wrap(r - dy, h);
    for (int c = 0; c < w; ++c) {
      const int sc = wrap(c - dx, w);
      for (int ch = 0; ch < ImageTensor::kChannels; ++ch) {
        out.at(r, c, ch) = img.at(sr, sc, ch);
      }
    }
  }
  return out;
}

ImageTensor blur_image(const ImageTensor& img, int radius) {
  if (radius < 1) throw ConfigError("blur radius must be >= 1");
  const int h = img.height();
  const int w = img.width();
  const double norm = 1.0 / ((2.0 * radius + 1) * (2.0 * radius + 1));
  ImageTensor out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < ImageTensor::kChannels; ++ch) {
        double acc = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int sr = wrap(r + dy, h);
          for (int dx = -radius; dx <= radius; ++dx) {
            acc += img.at(sr, wrap(c + dx, w), ch);
          }
        }
        out.at(r, c, ch) = static_cast<float>(std::clamp(acc * norm, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace provaudit
