#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "support.hpp"
#include "tif/codec/png.hpp"
#include "tif/codec/raster.hpp"
#include "tif/codec/superpixel.hpp"

using namespace tif;
using namespace tif::codec;

namespace {

text::NormStats unit_stats(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

QuantizedVector random_bytes(std::size_t n, nn::Rng& rng) {
  QuantizedVector q(n);
  for (auto& b : q) b = static_cast<std::uint8_t>(rng.below(256));
  return q;
}

}  // namespace

TEST(Quantize, RoundingAndEndpoints) {
  const auto s = unit_stats(1);
  EXPECT_EQ(quantize({0.5}, s)[0], 128);
  EXPECT_EQ(quantize({0.0}, s)[0], 0);
  EXPECT_EQ(quantize({1.0}, s)[0], 255);
  EXPECT_EQ(quantize({1.7}, s)[0], 255);
  EXPECT_EQ(quantize({-3.0}, s)[0], 0);
  EXPECT_THROW(quantize({0.1, 0.2}, s), std::invalid_argument);
}

TEST(Quantize, DegenerateRange) {
  const text::NormStats s{{2.5}, {2.5}};
  EXPECT_EQ(quantize({2.5}, s)[0], 0);
  EXPECT_EQ(dequantize({0}, s)[0], 2.5);
  EXPECT_EQ(dequantize({200}, s)[0], 2.5);
}

TEST(Dequantize, Endpoints) {
  const text::NormStats s{{-2.0}, {3.0}};
  EXPECT_EQ(dequantize({0}, s)[0], -2.0);
  EXPECT_EQ(dequantize({255}, s)[0], 3.0);
}

TEST(Quantize, RoundTripWithinHalfStep) {
  nn::Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    text::NormStats s{std::vector<double>(n), std::vector<double>(n)};
    text::FeatureVector v(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.min[i] = rng.uniform(-10, 10);
      s.max[i] = s.min[i] + rng.uniform(1e-6, 20);
      v[i] = rng.uniform(s.min[i], s.max[i]);
    }
    const auto back = dequantize(quantize(v, s), s);
    for (std::size_t i = 0; i < n; ++i)
      ASSERT_LE(std::abs(v[i] - back[i]), (s.max[i] - s.min[i]) / 510.0 + 1e-9) << trial << ":" << i;
  }
}

TEST(Superpixels, TwoBlockExample) {
  const EncodingGeometry g{2, 1, 2, {}};
  const RasterImage img = encode_superpixels({10, 20, 30, 40, 50, 60}, g);
  ASSERT_EQ(img.width(), 4u);
  ASSERT_EQ(img.height(), 2u);
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t x = 0; x < 2; ++x) EXPECT_EQ(img.pixel(x, y), (Rgb{10, 20, 30}));
    for (std::size_t x = 2; x < 4; ++x) EXPECT_EQ(img.pixel(x, y), (Rgb{40, 50, 60}));
  }
  EXPECT_EQ(decode_superpixels(img, g), (QuantizedVector{10, 20, 30, 40, 50, 60}));
}

TEST(Superpixels, ZeroBytesGiveBlackRegion) {
  const EncodingGeometry g{3, 2, 4, {}};
  const RasterImage img = encode_superpixels(QuantizedVector(18, 0), g);
  for (auto b : img.bytes()) EXPECT_EQ(b, 0);
}

TEST(Superpixels, IdentityOverRandomVectorsAndGeometries) {
  nn::Rng rng(7);
  const EncodingGeometry fixed[] = {{10, 10, 3, {}}, {10, 10, 4, {}}, {25, 10, 3, {}}, {5, 2, 4, {}}};
  for (int trial = 0; trial < 1000; ++trial) {
    EncodingGeometry g = trial < 4 ? fixed[trial]
                                   : EncodingGeometry{1 + rng.below(12), 1 + rng.below(12), 1 + rng.below(5), {}};
    if (trial >= 4 && trial % 2) g = fixed[trial % 4];
    const auto q = random_bytes(g.vector_length(), rng);
    ASSERT_EQ(decode_superpixels(encode_superpixels(q, g), g), q) << trial;
  }
}

TEST(Superpixels, FitOnLargeCanvasForBothBlockSizes) {
  const RasterImage canvas(227, 227, Rgb{9, 9, 9});
  nn::Rng rng(3);
  for (std::size_t p : {3, 4}) {
    EncodingGeometry g{10, 10, p, {100, 120}};
    const auto q = random_bytes(300, rng);
    const RasterImage fused = paint_encoding(canvas, q, g);
    EXPECT_EQ(decode_superpixels(fused, g), q);
    g.anchor = {200, 0};
    EXPECT_FALSE(g.fits(227, 227));
    EXPECT_THROW(paint_encoding(canvas, q, g), std::out_of_range);
  }
}

TEST(Superpixels, CorruptedBlockReadsTopLeft) {
  const EncodingGeometry g{1, 1, 3, {}};
  RasterImage img = encode_superpixels({1, 2, 3}, g);
  img.set_pixel(1, 1, {200, 200, 200});
  img.set_pixel(2, 0, {99, 99, 99});
  EXPECT_EQ(decode_superpixels(img, g), (QuantizedVector{1, 2, 3}));
}

TEST(Superpixels, LengthMismatchRejected) {
  EXPECT_THROW(encode_superpixels({1, 2, 3, 4}, {1, 1, 2, {}}), std::invalid_argument);
  EXPECT_THROW((EncodingGeometry{0, 1, 2, {}}.validate()), std::invalid_argument);
}

TEST(FactorGrid, MostSquare) {
  EXPECT_EQ(factor_grid(10), (std::pair<std::size_t, std::size_t>{2, 5}));
  EXPECT_EQ(factor_grid(25), (std::pair<std::size_t, std::size_t>{5, 5}));
  EXPECT_EQ(factor_grid(50), (std::pair<std::size_t, std::size_t>{5, 10}));
  EXPECT_EQ(factor_grid(100), (std::pair<std::size_t, std::size_t>{10, 10}));
  EXPECT_EQ(factor_grid(250), (std::pair<std::size_t, std::size_t>{10, 25}));
  EXPECT_EQ(factor_grid(7), (std::pair<std::size_t, std::size_t>{1, 7}));
}

TEST(Overlay, RegionAndComplement) {
  nn::Rng rng(5);
  RasterImage base(20, 15);
  for (auto& b : base.bytes()) b = static_cast<std::uint8_t>(rng.below(256));
  const EncodingGeometry g{3, 2, 2, {0, 0}};
  const auto patch = encode_superpixels(random_bytes(18, rng), g);
  const auto fused = overlay(base, patch, {0, 0});
  for (std::size_t y = 0; y < 15; ++y)
    for (std::size_t x = 0; x < 20; ++x)
      EXPECT_EQ(fused.pixel(x, y), x < 6 && y < 4 ? patch.pixel(x, y) : base.pixel(x, y));
  // Re-encoding the decoded region changes nothing.
  const auto again = paint_encoding(fused, decode_superpixels(fused, g), g);
  EXPECT_EQ(again, fused);
}

TEST(Resize, IdentityOnSameSize) {
  nn::Rng rng(1);
  RasterImage img(227, 227);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.below(256));
  EXPECT_EQ(resize_bilinear(img, 227, 227), img);
}

TEST(Resize, TwoPixelRampMatchesClosedForm) {
  RasterImage img(2, 1);
  img.set_pixel(0, 0, {0, 0, 0});
  img.set_pixel(1, 0, {255, 255, 255});
  const auto out = resize_bilinear(img, 4, 1);
  // Corner-aligned sampling at x = 0, 1/3, 2/3, 1.
  const std::uint8_t want[] = {0, 85, 170, 255};
  for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(out.pixel(x, 0), (Rgb{want[x], want[x], want[x]})) << x;
}

TEST(Resize, ConstantStaysConstant) {
  const RasterImage img(13, 7, Rgb{12, 200, 77});
  EXPECT_EQ(resize_bilinear(img, 64, 64), RasterImage(64, 64, Rgb{12, 200, 77}));
  EXPECT_EQ(resize_bilinear(img, 1, 1), RasterImage(1, 1, Rgb{12, 200, 77}));
}

TEST(Png, RoundTripAndErrors) {
  tif::testing::TempDir dir("png");
  nn::Rng rng(8);
  RasterImage img(17, 9);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.below(256));
  const auto path = (dir.path() / "a.png").string();
  write_png(img, path);
  EXPECT_EQ(read_png(path), img);
  std::ofstream(dir.path() / "bad.png") << "not a png";
  EXPECT_THROW(read_png((dir.path() / "bad.png").string()), PngError);
  EXPECT_THROW(read_png((dir.path() / "none.png").string()), PngError);
}

TEST(Png, WritesAreByteDeterministic) {
  tif::testing::TempDir dir("pngdet");
  const RasterImage img(31, 31, Rgb{1, 2, 3});
  write_png(img, (dir.path() / "a.png").string());
  write_png(img, (dir.path() / "b.png").string());
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir.path() / "a.png"), slurp(dir.path() / "b.png"));
}
