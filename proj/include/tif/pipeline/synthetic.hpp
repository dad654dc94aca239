#pragma once

// Paired text/image toy datasets.
//
// Each class has a keyword and a look (shape + colour). A sample's text is its
// keyword dropped among noise words; its image is the look drawn over a grey
// noise texture. Classes pair up as siblings (0,1), (2,3), ... With
// probability text_ambiguity a sample's text carries the pair's shared
// keyword instead of its own; otherwise, with probability image_ambiguity, its
// image carries the pair's shared look. At most one modality is ambiguous per
// sample, so the pair member is always recoverable from both together.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/codec/png.hpp"
#include "tif/codec/raster.hpp"
#include "tif/nn/random.hpp"
#include "tif/pipeline/manifest.hpp"

namespace tif::pipeline {

enum class ShapeKind { Circle, Square, Triangle, Cross };

struct Look {
  ShapeKind shape = ShapeKind::Circle;
  codec::Rgb color{200, 40, 40};
};

struct SyntheticClass {
  std::string name;
  std::string keyword;
  Look look;
};

/// Cues shared by a sibling pair, used for ambiguous samples.
struct SharedCue {
  std::string keyword;
  Look look;
};

struct SyntheticSpec {
  std::vector<SyntheticClass> classes;
  std::vector<SharedCue> pair_cues;  // one per sibling pair; needed when a rate is > 0
  std::size_t train_per_class = 50;
  std::size_t test_per_class = 20;
  double text_ambiguity = 0.0;
  double image_ambiguity = 0.0;
  std::vector<std::string> noise_words{"the",    "new",   "with",  "for",   "and",   "quality", "classic",
                                       "size",   "model", "set",   "pack",  "great", "price",   "item",
                                       "series", "style", "extra", "light", "daily", "useful"};
  std::size_t min_noise_words = 3;
  std::size_t max_noise_words = 8;
  std::size_t side = 64;
  std::uint64_t seed = 1;

  std::size_t sibling(std::size_t c) const { return (c ^ 1U) < classes.size() ? (c ^ 1U) : c; }

  void validate() const {
    if (classes.size() < 2) throw std::invalid_argument("synthetic spec: at least 2 classes required");
    auto rate = [](double r, const char* what) {
      if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument(std::string("synthetic spec: ") + what + " must be in [0,1]");
    };
    rate(text_ambiguity, "text_ambiguity");
    rate(image_ambiguity, "image_ambiguity");
    if (text_ambiguity + image_ambiguity > 1.0) {
      throw std::invalid_argument("synthetic spec: ambiguity rates must sum to at most 1");
    }
    if ((text_ambiguity > 0.0 || image_ambiguity > 0.0) && pair_cues.size() < (classes.size() + 1) / 2) {
      throw std::invalid_argument("synthetic spec: ambiguity needs a shared cue per sibling pair");
    }
    if (noise_words.empty() || min_noise_words > max_noise_words) {
      throw std::invalid_argument("synthetic spec: bad noise word settings");
    }
    if (side < 8) throw std::invalid_argument("synthetic spec: image side must be at least 8");
    if (train_per_class == 0) throw std::invalid_argument("synthetic spec: train_per_class must be positive");
  }

  /// Four classes {A,B} x {red,blue}: text names only A/B, image shows only
  /// red/blue, so each modality alone identifies the class with probability 1/2.
  static SyntheticSpec xor_spec(std::uint64_t seed = 1) {
    SyntheticSpec s;
    const codec::Rgb red{210, 40, 40}, blue{40, 70, 210};
    s.classes = {{"alpha_red", "alpha", {ShapeKind::Circle, red}},
                 {"alpha_blue", "alpha", {ShapeKind::Circle, blue}},
                 {"beta_red", "beta", {ShapeKind::Circle, red}},
                 {"beta_blue", "beta", {ShapeKind::Circle, blue}}};
    s.seed = seed;
    return s;
  }

  /// Four classes, each with its own keyword and look; siblings share a
  /// decoy keyword and look used at the given ambiguity rate per modality.
  static SyntheticSpec soft_spec(double ambiguity = 0.3, std::uint64_t seed = 1) {
    SyntheticSpec s;
    s.classes = {{"helmet", "helmet", {ShapeKind::Circle, {210, 40, 40}}},
                 {"bicycle", "bicycle", {ShapeKind::Square, {40, 70, 210}}},
                 {"ladder", "ladder", {ShapeKind::Triangle, {40, 170, 60}}},
                 {"scaffold", "scaffold", {ShapeKind::Cross, {230, 200, 40}}}};
    s.pair_cues = {{"bike", {ShapeKind::Square, {150, 60, 170}}}, {"climb", {ShapeKind::Triangle, {240, 130, 30}}}};
    s.text_ambiguity = ambiguity;
    s.image_ambiguity = ambiguity;
    s.seed = seed;
    return s;
  }
};

struct SyntheticSample {
  std::size_t label = 0;
  std::string text;
  codec::RasterImage image;
  bool text_ambiguous = false;
  bool image_ambiguous = false;
};

struct SyntheticDataset {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
};

inline codec::RasterImage draw_look(const Look& look, std::size_t side, nn::Rng& rng) {
  codec::RasterImage img(side, side);
  for (auto& b : img.bytes()) b = 0;
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const auto g = static_cast<std::uint8_t>(110 + rng.below(60));
      img.set_pixel(x, y, {g, g, g});
    }
  }
  const double s = static_cast<double>(side);
  const double cx = s / 2.0 + rng.uniform(-s / 8.0, s / 8.0);
  const double cy = s / 2.0 + rng.uniform(-s / 8.0, s / 8.0);
  const double r = s * rng.uniform(0.18, 0.25);
  codec::Rgb color = look.color;
  for (auto& ch : color) ch = codec::to_byte(static_cast<double>(ch) + rng.uniform(-15.0, 15.0));
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
      bool inside = false;
      switch (look.shape) {
        case ShapeKind::Circle: inside = dx * dx + dy * dy <= r * r; break;
        case ShapeKind::Square: inside = std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r; break;
        case ShapeKind::Triangle: inside = dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0; break;
        case ShapeKind::Cross:
          inside = std::abs(dx) <= r && std::abs(dy) <= r && (std::abs(dx) <= r / 3.0 || std::abs(dy) <= r / 3.0);
          break;
      }
      if (inside) img.set_pixel(x, y, color);
    }
  }
  return img;
}

inline std::string compose_text(const std::string& keyword, const SyntheticSpec& spec, nn::Rng& rng) {
  const std::size_t n = spec.min_noise_words + rng.below(spec.max_noise_words - spec.min_noise_words + 1);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back(spec.noise_words[rng.below(spec.noise_words.size())]);
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(n + 1)), keyword);
  std::string text;
  for (std::size_t i = 0; i < words.size(); ++i) text += (i ? " " : "") + words[i];
  return text;
}

/// In-memory generation; same spec and seed give identical samples.
inline SyntheticDataset generate_synthetic_samples(const SyntheticSpec& spec) {
  spec.validate();
  nn::Rng rng(spec.seed);
  SyntheticDataset ds;
  auto make = [&](std::size_t c) {
    SyntheticSample s;
    s.label = c;
    const double u = rng.uniform();
    s.text_ambiguous = u < spec.text_ambiguity;
    s.image_ambiguous = !s.text_ambiguous && u < spec.text_ambiguity + spec.image_ambiguity;
    const SyntheticClass& cls = spec.classes[c];
    const bool paired = spec.sibling(c) != c;
    const std::string& keyword = s.text_ambiguous && paired ? spec.pair_cues[c / 2].keyword : cls.keyword;
    const Look& look = s.image_ambiguous && paired ? spec.pair_cues[c / 2].look : cls.look;
    s.text = compose_text(keyword, spec, rng);
    s.image = draw_look(look, spec.side, rng);
    return s;
  };
  for (std::size_t i = 0; i < spec.train_per_class; ++i)
    for (std::size_t c = 0; c < spec.classes.size(); ++c) ds.train.push_back(make(c));
  for (std::size_t i = 0; i < spec.test_per_class; ++i)
    for (std::size_t c = 0; c < spec.classes.size(); ++c) ds.test.push_back(make(c));
  return ds;
}

struct WrittenDataset {
  fs::path train_manifest;
  fs::path test_manifest;
};

/// Writes images/<split>_NNNNN.png plus train.tsv and test.tsv under `out_dir`.
inline WrittenDataset generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  const SyntheticDataset ds = generate_synthetic_samples(spec);
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());
  auto write_split = [&](const std::vector<SyntheticSample>& samples, const std::string& split) {
    DatasetManifest m;
    m.base_dir = out_dir;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::ostringstream name;
      name << "images/" << split << "_" << std::setw(5) << std::setfill('0') << i << ".png";
      codec::write_png(samples[i].image, (out_dir / name.str()).string());
      m.records.push_back({spec.classes[samples[i].label].name, name.str(), samples[i].text});
    }
    const fs::path path = out_dir / (split + ".tsv");
    write_manifest(m, path);
    return path;
  };
  return {write_split(ds.train, "train"), write_split(ds.test, "test")};
}

}  // namespace tif::pipeline
