#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tif/codec/superpixel.hpp"
#include "tif/image/mini_cnn.hpp"
#include "tif/nn/train.hpp"
#include "tif/text/text_model.hpp"
#include "tif/util/kv_config.hpp"

namespace tif::pipeline {

/// Everything a run needs besides data and seed. Defaults are desk scale:
/// the text model keeps the three filter widths but uses a 32-token window,
/// 32-wide embeddings and 32 filters per width; images are 64x64.
struct ExperimentConfig {
  text::TextModelConfig text = desk_text_config();
  std::size_t min_frequency = 1;
  image::MiniCnnConfig image{};
  std::size_t superpixel = 3;
  codec::PixelAnchor anchor{};
  std::size_t epochs = 60;
  double learning_rate = 0.01;
  std::size_t early_epochs = 60;
  double early_learning_rate = 0.01;
  std::vector<double> late_alpha{0.5, 0.5};

  static text::TextModelConfig desk_text_config() {
    text::TextModelConfig c;
    c.seq_len = 32;
    c.embed_width = 32;
    c.filters_per_size = 32;
    return c;
  }

  /// Superpixel geometry implied by the text grid.
  codec::EncodingGeometry geometry() const { return {text.grid_w, text.grid_h, superpixel, anchor}; }

  nn::TrainOptions train_options(std::uint64_t seed) const { return {epochs, learning_rate, seed, true}; }
  nn::TrainOptions early_options(std::uint64_t seed) const { return {early_epochs, early_learning_rate, seed, true}; }

  KvConfig to_kv() const {
    KvConfig kv = text.to_kv();
    const KvConfig image_kv = image.to_kv();
    for (const auto& [k, v] : image_kv.entries()) kv.set(k, v);
    kv.set("text.min_frequency", std::to_string(min_frequency));
    kv.set("geometry.superpixel", std::to_string(superpixel));
    kv.set("geometry.anchor_x", std::to_string(anchor.x));
    kv.set("geometry.anchor_y", std::to_string(anchor.y));
    kv.set("train.epochs", std::to_string(epochs));
    kv.set("train.learning_rate", format_double(learning_rate));
    kv.set("early.epochs", std::to_string(early_epochs));
    kv.set("early.learning_rate", format_double(early_learning_rate));
    std::string alpha;
    for (std::size_t i = 0; i < late_alpha.size(); ++i) alpha += (i ? "," : "") + format_double(late_alpha[i]);
    kv.set("late.alpha", alpha);
    return kv;
  }

  /// Unknown keys are rejected so a typo cannot silently fall back to a default.
  static ExperimentConfig from_kv(const KvConfig& kv) {
    ExperimentConfig c;
    const KvConfig known = c.to_kv();
    for (const auto& [k, v] : kv.entries())
      if (!known.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    c.text = text::TextModelConfig::from_kv(kv, c.text);
    c.min_frequency = kv.get_uint("text.min_frequency", c.min_frequency);
    c.image = image::MiniCnnConfig::from_kv(kv, c.image);
    c.superpixel = kv.get_uint("geometry.superpixel", c.superpixel);
    c.anchor.x = kv.get_uint("geometry.anchor_x", c.anchor.x);
    c.anchor.y = kv.get_uint("geometry.anchor_y", c.anchor.y);
    c.epochs = kv.get_uint("train.epochs", c.epochs);
    c.learning_rate = kv.get_double("train.learning_rate", c.learning_rate);
    c.early_epochs = kv.get_uint("early.epochs", c.early_epochs);
    c.early_learning_rate = kv.get_double("early.learning_rate", c.early_learning_rate);
    c.late_alpha = kv.get_double_list("late.alpha", c.late_alpha);
    if (c.epochs > 60) throw ConfigError("train.epochs is capped at 60");
    return c;
  }
};

}  // namespace tif::pipeline
