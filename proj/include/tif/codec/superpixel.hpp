#pragma once

// Feature vector <-> RGB superpixel grid.
//
// A quantized vector of L = 3 * Wt * Ht bytes is read as Wt * Ht colours.
// Colour i fills the P x P block at grid row i / Wt, column i % Wt, so the
// grid is written left to right, top to bottom. The region always measures
// Wt*P x Ht*P pixels, whatever the length of the source text.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/codec/raster.hpp"
#include "tif/text/features.hpp"
#include "tif/util/kv_config.hpp"

namespace tif::codec {

using QuantizedVector = std::vector<std::uint8_t>;

struct EncodingGeometry {
  std::size_t grid_w = 10;
  std::size_t grid_h = 10;
  std::size_t superpixel = 3;  // P
  PixelAnchor anchor{};

  std::size_t cells() const noexcept { return grid_w * grid_h; }
  std::size_t vector_length() const noexcept { return 3 * cells(); }
  std::size_t region_width() const noexcept { return grid_w * superpixel; }
  std::size_t region_height() const noexcept { return grid_h * superpixel; }

  void validate() const {
    if (grid_w == 0 || grid_h == 0) throw std::invalid_argument("encoding geometry: grid dimensions must be positive");
    if (superpixel == 0) throw std::invalid_argument("encoding geometry: superpixel size must be >= 1");
  }

  bool fits(std::size_t width, std::size_t height) const noexcept {
    return anchor.x + region_width() <= width && anchor.y + region_height() <= height;
  }

  void require_fit(std::size_t width, std::size_t height) const {
    if (!fits(width, height)) {
      throw std::out_of_range("encoding region " + std::to_string(region_width()) + "x" +
                              std::to_string(region_height()) + " at (" + std::to_string(anchor.x) + "," +
                              std::to_string(anchor.y) + ") does not fit a " + std::to_string(width) + "x" +
                              std::to_string(height) + " image");
    }
  }

  KvConfig to_kv() const {
    KvConfig kv;
    kv.set("geometry.grid_w", std::to_string(grid_w));
    kv.set("geometry.grid_h", std::to_string(grid_h));
    kv.set("geometry.superpixel", std::to_string(superpixel));
    kv.set("geometry.anchor_x", std::to_string(anchor.x));
    kv.set("geometry.anchor_y", std::to_string(anchor.y));
    return kv;
  }

  static EncodingGeometry from_kv(const KvConfig& kv) { return from_kv(kv, EncodingGeometry{}); }
  static EncodingGeometry from_kv(const KvConfig& kv, EncodingGeometry base) {
    EncodingGeometry g = base;
    g.grid_w = kv.get_uint("geometry.grid_w", g.grid_w);
    g.grid_h = kv.get_uint("geometry.grid_h", g.grid_h);
    g.superpixel = kv.get_uint("geometry.superpixel", g.superpixel);
    g.anchor.x = kv.get_uint("geometry.anchor_x", g.anchor.x);
    g.anchor.y = kv.get_uint("geometry.anchor_y", g.anchor.y);
    return g;
  }

  friend bool operator==(const EncodingGeometry&, const EncodingGeometry&) = default;
};

/// Most square Ht x Wt grid with Ht * Wt == cells and Ht <= Wt.
inline std::pair<std::size_t, std::size_t> factor_grid(std::size_t cells) {
  if (cells == 0) throw std::invalid_argument("factor_grid: zero cells");
  std::size_t h = static_cast<std::size_t>(std::sqrt(static_cast<double>(cells)));
  while (h > 1 && cells % h != 0) --h;
  return {h, cells / h};
}

// ---------------------------------------------------------------------------

/// byte = round(255 * (v - min) / (max - min)), half away from zero, clamped;
/// dimensions with min == max map to 0.
inline QuantizedVector quantize(const text::FeatureVector& v, const text::NormStats& stats) {
  if (v.size() != stats.size()) {
    throw std::invalid_argument("quantize: vector length " + std::to_string(v.size()) + " vs stats length " +
                                std::to_string(stats.size()));
  }
  QuantizedVector q(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double range = stats.max[i] - stats.min[i];
    q[i] = range > 0.0 ? to_byte(255.0 * (v[i] - stats.min[i]) / range) : 0;
  }
  return q;
}

inline text::FeatureVector dequantize(const QuantizedVector& q, const text::NormStats& stats) {
  if (q.size() != stats.size()) {
    throw std::invalid_argument("dequantize: vector length " + std::to_string(q.size()) + " vs stats length " +
                                std::to_string(stats.size()));
  }
  text::FeatureVector v(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    v[i] = stats.min[i] + (static_cast<double>(q[i]) / 255.0) * (stats.max[i] - stats.min[i]);
  }
  return v;
}

inline RasterImage encode_superpixels(const QuantizedVector& q, const EncodingGeometry& geom) {
  geom.validate();
  if (q.size() != geom.vector_length()) {
    throw std::invalid_argument("encode_superpixels: vector length " + std::to_string(q.size()) + " != 3*" +
                                std::to_string(geom.grid_w) + "*" + std::to_string(geom.grid_h));
  }
  const std::size_t p = geom.superpixel;
  RasterImage img(geom.region_width(), geom.region_height());
  for (std::size_t i = 0; i < geom.cells(); ++i) {
    const Rgb color{q[3 * i], q[3 * i + 1], q[3 * i + 2]};
    const std::size_t x0 = (i % geom.grid_w) * p, y0 = (i / geom.grid_w) * p;
    for (std::size_t y = y0; y < y0 + p; ++y)
      for (std::size_t x = x0; x < x0 + p; ++x) img.set_pixel(x, y, color);
  }
  return img;
}

/// Reads the top-left pixel of every block of the region at geom.anchor.
inline QuantizedVector decode_superpixels(const RasterImage& img, const EncodingGeometry& geom) {
  geom.validate();
  geom.require_fit(img.width(), img.height());
  QuantizedVector q(geom.vector_length());
  for (std::size_t i = 0; i < geom.cells(); ++i) {
    const Rgb c = img.pixel(geom.anchor.x + (i % geom.grid_w) * geom.superpixel,
                            geom.anchor.y + (i / geom.grid_w) * geom.superpixel);
    q[3 * i] = c[0];
    q[3 * i + 1] = c[1];
    q[3 * i + 2] = c[2];
  }
  return q;
}

/// Paints the superpixel encoding of `q` over `base` at geom.anchor.
inline RasterImage paint_encoding(const RasterImage& base, const QuantizedVector& q, const EncodingGeometry& geom) {
  geom.require_fit(base.width(), base.height());
  return overlay(base, encode_superpixels(q, geom), geom.anchor);
}

}  // namespace tif::codec
