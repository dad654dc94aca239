#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tif::codec {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB image, row-major, three bytes per pixel.
class RasterImage {
 public:
  RasterImage() = default;

  RasterImage(std::size_t width, std::size_t height, Rgb fill = {0, 0, 0})
      : width_(width), height_(height), pixels_(width * height * 3) {
    if (width == 0 || height == 0) throw std::invalid_argument("RasterImage: dimensions must be positive");
    for (std::size_t i = 0; i < width * height; ++i) std::copy(fill.begin(), fill.end(), pixels_.begin() + 3 * i);
  }

  RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> bytes)
      : width_(width), height_(height), pixels_(std::move(bytes)) {
    if (width == 0 || height == 0) throw std::invalid_argument("RasterImage: dimensions must be positive");
    if (pixels_.size() != width * height * 3) {
      throw std::invalid_argument("RasterImage: " + std::to_string(pixels_.size()) + " bytes for " +
                                  std::to_string(width) + "x" + std::to_string(height));
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& bytes() noexcept { return pixels_; }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) noexcept { return pixels_[(y * width_ + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const noexcept { return pixels_[(y * width_ + x) * 3 + c]; }

  Rgb pixel(std::size_t x, std::size_t y) const noexcept {
    const std::size_t o = (y * width_ + x) * 3;
    return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
  }

  void set_pixel(std::size_t x, std::size_t y, Rgb c) noexcept {
    const std::size_t o = (y * width_ + x) * 3;
    pixels_[o] = c[0];
    pixels_[o + 1] = c[1];
    pixels_[o + 2] = c[2];
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

struct PixelAnchor {
  std::size_t x = 0;
  std::size_t y = 0;
  friend bool operator==(const PixelAnchor&, const PixelAnchor&) = default;
};

/// Round half away from zero, clamped to [0, 255].
inline std::uint8_t to_byte(double v) {
  const double r = std::round(v);  // std::round is half-away-from-zero
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

/// Bilinear resize with corner-aligned sampling: destination pixel i maps to
/// source coordinate i * (src - 1) / (dst - 1). Same-size resize is a copy.
inline RasterImage resize_bilinear(const RasterImage& img, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw std::invalid_argument("resize_bilinear: target dimensions must be positive");
  if (width == img.width() && height == img.height()) return img;
  RasterImage out(width, height);
  auto coord = [](std::size_t i, std::size_t src, std::size_t dst) {
    return dst == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
  };
  for (std::size_t y = 0; y < height; ++y) {
    const double sy = coord(y, img.height(), height);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double sx = coord(x, img.width(), width);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = to_byte((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

/// Opaque copy of `patch` onto `base` with its top-left corner at `anchor`.
inline RasterImage overlay(const RasterImage& base, const RasterImage& patch, PixelAnchor anchor) {
  if (anchor.x + patch.width() > base.width() || anchor.y + patch.height() > base.height()) {
    throw std::out_of_range("overlay: " + std::to_string(patch.width()) + "x" + std::to_string(patch.height()) +
                            " region at (" + std::to_string(anchor.x) + "," + std::to_string(anchor.y) +
                            ") exceeds " + std::to_string(base.width()) + "x" + std::to_string(base.height()) +
                            " image");
  }
  RasterImage out = base;
  for (std::size_t y = 0; y < patch.height(); ++y) {
    const auto src = patch.bytes().begin() + static_cast<std::ptrdiff_t>(y * patch.width() * 3);
    std::copy(src, src + static_cast<std::ptrdiff_t>(patch.width() * 3),
              out.bytes().begin() + static_cast<std::ptrdiff_t>(((anchor.y + y) * base.width() + anchor.x) * 3));
  }
  return out;
}

}  // namespace tif::codec
