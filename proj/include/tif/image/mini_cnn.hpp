#pragma once

// Small image classifier: {Conv2D(same padding) -> ReLU -> MaxPool2D} per
// stage, then Flatten -> Dense(hidden) -> ReLU -> Dense(C) -> softmax.
// Pixels enter as byte / 255 per channel.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/codec/raster.hpp"
#include "tif/nn/checkpoint.hpp"
#include "tif/nn/layer_spec.hpp"
#include "tif/nn/layers.hpp"
#include "tif/nn/random.hpp"
#include "tif/nn/train.hpp"
#include "tif/util/kv_config.hpp"

namespace tif::image {

using nn::Parameter;
using nn::Tensor;

struct ConvStage {
  std::size_t filters = 8;
  std::size_t kernel = 3;
  std::size_t pool = 2;
  friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

struct MiniCnnConfig {
  std::size_t side = 64;
  std::vector<ConvStage> stages{{8, 3, 2}, {16, 3, 2}};
  std::size_t hidden = 64;
  std::size_t classes = 2;

  /// Spatial side after every stage, or throws when a stage collapses it.
  std::vector<std::size_t> stage_sides() const {
    std::vector<std::size_t> sides;
    std::size_t s = side;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& st = stages[i];
      if (st.kernel % 2 == 0) throw std::invalid_argument("mini cnn config: stage kernel must be odd");
      if (st.pool == 0 || s < st.pool) {
        throw std::invalid_argument("mini cnn config: stage " + std::to_string(i + 1) + " reduces side " +
                                    std::to_string(s) + " below 1");
      }
      s /= st.pool;
      sides.push_back(s);
    }
    return sides;
  }

  std::size_t flatten_width() const {
    const auto sides = stage_sides();
    const std::size_t s = sides.empty() ? side : sides.back();
    const std::size_t ch = stages.empty() ? 3 : stages.back().filters;
    return s * s * ch;
  }

  void validate() const {
    if (side == 0 || hidden == 0 || classes == 0) {
      throw std::invalid_argument("mini cnn config: side, hidden and classes must be positive");
    }
    for (const auto& st : stages)
      if (st.filters == 0 || st.kernel == 0) throw std::invalid_argument("mini cnn config: stage counts must be positive");
    (void)stage_sides();
  }

  KvConfig to_kv() const {
    KvConfig kv;
    kv.set("image.side", std::to_string(side));
    std::string s;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      s += (i ? "," : "") + std::to_string(stages[i].filters) + "x" + std::to_string(stages[i].kernel) + "x" +
           std::to_string(stages[i].pool);
    }
    kv.set("image.stages", s);
    kv.set("image.hidden", std::to_string(hidden));
    kv.set("image.classes", std::to_string(classes));
    return kv;
  }

  static MiniCnnConfig from_kv(const KvConfig& kv) { return from_kv(kv, MiniCnnConfig{}); }
  static MiniCnnConfig from_kv(const KvConfig& kv, MiniCnnConfig base) {
    MiniCnnConfig c = base;
    c.side = kv.get_uint("image.side", c.side);
    c.hidden = kv.get_uint("image.hidden", c.hidden);
    c.classes = kv.get_uint("image.classes", c.classes);
    if (kv.contains("image.stages")) {
      c.stages.clear();
      const std::string text = kv.get_string("image.stages", "");
      if (!trim(text).empty()) {
        for (const auto& item : split(text, ',')) {
          const auto parts = split(item, 'x');
          if (parts.size() != 3) throw ConfigError("image.stages: expected FILTERSxKERNELxPOOL, got '" + item + "'");
          c.stages.push_back({KvConfig::parse_uint("image.stages", parts[0]), KvConfig::parse_uint("image.stages", parts[1]),
                              KvConfig::parse_uint("image.stages", parts[2])});
        }
      }
    }
    return c;
  }

  friend bool operator==(const MiniCnnConfig&, const MiniCnnConfig&) = default;
};

/// [H x W x 3] tensor with each channel byte scaled to [0, 1].
inline Tensor to_tensor(const codec::RasterImage& img) {
  Tensor t({img.height(), img.width(), 3});
  const auto& b = img.bytes();
  for (std::size_t i = 0; i < b.size(); ++i) t[i] = static_cast<double>(b[i]) / 255.0;
  return t;
}

class MiniCnn {
 public:
  struct Activations {
    std::vector<Tensor> conv;          // pre-ReLU per stage
    std::vector<nn::MaxPool2d> pooled; // pooled ReLU(conv) per stage
    Tensor flat;
    Tensor hidden_pre;
    Tensor hidden;
    Tensor logits;
  };

  MiniCnn(MiniCnnConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    nn::Rng rng(seed);
    std::size_t cin = 3;
    for (std::size_t i = 0; i < config_.stages.size(); ++i) {
      const auto& st = config_.stages[i];
      const std::string tag = "conv" + std::to_string(i + 1);
      Parameter w(tag + ".weight", Tensor({st.filters, st.kernel, st.kernel, cin}));
      nn::glorot_uniform(w.value, st.kernel * st.kernel * cin, st.filters, rng);
      conv_w_.push_back(std::move(w));
      conv_b_.emplace_back(tag + ".bias", Tensor({st.filters}));
      cin = st.filters;
    }
    const std::size_t flat = config_.flatten_width();
    hidden_w_ = Parameter("hidden.weight", Tensor({config_.hidden, flat}));
    nn::glorot_uniform(hidden_w_.value, flat, config_.hidden, rng);
    hidden_b_ = Parameter("hidden.bias", Tensor({config_.hidden}));
    out_w_ = Parameter("output.weight", Tensor({config_.classes, config_.hidden}));
    nn::glorot_uniform(out_w_.value, config_.hidden, config_.classes, rng);
    out_b_ = Parameter("output.bias", Tensor({config_.classes}));
  }

  const MiniCnnConfig& config() const noexcept { return config_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps;
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
      ps.push_back(&conv_w_[i]);
      ps.push_back(&conv_b_[i]);
    }
    for (Parameter* p : {&hidden_w_, &hidden_b_, &out_w_, &out_b_}) ps.push_back(p);
    return ps;
  }

  std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<MiniCnn*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  std::vector<nn::LayerSpec> plan() const {
    using nn::LayerKind;
    std::vector<nn::LayerSpec> p;
    std::size_t cin = 3;
    for (std::size_t i = 0; i < config_.stages.size(); ++i) {
      const auto& st = config_.stages[i];
      const int prev = static_cast<int>(p.size()) - 1;
      const std::string tag = std::to_string(i + 1);
      p.push_back({LayerKind::Conv2D, "conv" + tag, st.kernel, 1, st.kernel / 2, st.kernel * st.kernel * cin,
                   st.filters, {prev}});
      p.push_back({LayerKind::ReLU, "relu" + tag, 0, 1, 0, 0, 0, {prev + 1}});
      p.push_back({LayerKind::MaxPool2D, "pool" + tag, st.pool, st.pool, 0, 0, 0, {prev + 2}});
      cin = st.filters;
    }
    const int last = static_cast<int>(p.size()) - 1;
    p.push_back({LayerKind::Flatten, "flatten", 0, 1, 0, 0, 0, {last}});
    p.push_back({LayerKind::Dense, "hidden", 0, 1, 0, config_.flatten_width(), config_.hidden, {last + 1}});
    p.push_back({LayerKind::ReLU, "hidden_relu", 0, 1, 0, 0, 0, {last + 2}});
    p.push_back({LayerKind::Dense, "output", 0, 1, 0, config_.hidden, config_.classes, {last + 3}});
    p.push_back({LayerKind::SoftmaxXent, "softmax", 0, 1, 0, 0, 0, {last + 4}});
    return p;
  }

  Activations forward(const Tensor& input) const {
    if (input.shape() != nn::Shape{config_.side, config_.side, 3}) {
      throw nn::ShapeError("mini cnn: input " + nn::to_string(input.shape()) + ", expected " +
                           nn::to_string({config_.side, config_.side, 3}));
    }
    Activations a;
    const Tensor* x = &input;
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
      const auto& st = config_.stages[i];
      a.conv.push_back(nn::conv2d(*x, conv_w_[i], conv_b_[i], {1, st.kernel / 2}));
      a.pooled.push_back(nn::maxpool2d(nn::relu(a.conv.back()), st.pool, st.pool));
      x = &a.pooled.back().output;
    }
    a.flat = nn::flatten(*x);
    a.hidden_pre = nn::dense(a.flat, hidden_w_, hidden_b_);
    a.hidden = nn::relu(a.hidden_pre);
    a.logits = nn::dense(a.hidden, out_w_, out_b_);
    return a;
  }

  void backward(const Tensor& input, const Activations& a, const Tensor& grad_logits) {
    Tensor g = nn::dense_backward(a.hidden, grad_logits, out_w_, out_b_);
    g = nn::relu_backward(a.hidden_pre, g);
    g = nn::dense_backward(a.flat, g, hidden_w_, hidden_b_);
    for (std::size_t i = conv_w_.size(); i-- > 0;) {
      const auto& st = config_.stages[i];
      g = nn::maxpool2d_backward(a.conv[i].shape(), g, a.pooled[i].argmax);
      g = nn::relu_backward(a.conv[i], g);
      const Tensor& in = i == 0 ? input : a.pooled[i - 1].output;
      g = nn::conv2d_backward(in, g, conv_w_[i], conv_b_[i], {1, st.kernel / 2}, i != 0);
    }
  }

  nn::ExampleResult accumulate(const Tensor& input, std::size_t label) {
    const Activations a = forward(input);
    const auto sx = nn::softmax_xent(a.logits, label);
    backward(input, a, nn::softmax_xent_backward(sx.probs, label));
    return {sx.loss, nn::argmax(sx.probs.data())};
  }

  double loss(const Tensor& input, std::size_t label) const {
    return nn::softmax_xent(forward(input).logits, label).loss;
  }

  Tensor posteriors(const Tensor& input) const { return nn::softmax(forward(input).logits); }
  Tensor posteriors(const codec::RasterImage& img) const { return posteriors(checked_tensor(img)); }

  std::size_t predict(const Tensor& input) const { return nn::argmax(forward(input).logits.data()); }

  /// Post-ReLU hidden layer activation.
  std::vector<double> features(const Tensor& input) const {
    return forward(input).hidden.values();
  }
  std::vector<double> features(const codec::RasterImage& img) const { return features(checked_tensor(img)); }

  void write_to(nn::Checkpoint& ck) const {
    ck.model_kind = "mini-cnn";
    ck.config = config_.to_kv().serialize();
    ck.layers = plan();
    ck.params.clear();
    for (const Parameter* p : parameters()) ck.params.push_back({p->name, p->value});
  }

  nn::Checkpoint to_checkpoint() const {
    nn::Checkpoint ck;
    write_to(ck);
    return ck;
  }

  static MiniCnn from_checkpoint(const nn::Checkpoint& ck) {
    if (ck.model_kind != "mini-cnn") throw nn::CheckpointError("expected a mini-cnn checkpoint, got " + ck.model_kind);
    MiniCnn m(MiniCnnConfig::from_kv(KvConfig::parse(ck.config)), 0);
    for (Parameter* p : m.parameters()) {
      const Tensor& stored = ck.param(p->name);
      if (stored.shape() != p->shape()) {
        throw nn::CheckpointError("parameter " + p->name + " has shape " + nn::to_string(stored.shape()) +
                                  ", config implies " + nn::to_string(p->shape()));
      }
      p->value = stored;
    }
    return m;
  }

 private:
  Tensor checked_tensor(const codec::RasterImage& img) const {
    if (img.width() != config_.side || img.height() != config_.side) {
      throw nn::ShapeError("mini cnn: image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                           ", model expects " + std::to_string(config_.side) + "x" + std::to_string(config_.side));
    }
    return to_tensor(img);
  }

  MiniCnnConfig config_;
  std::vector<Parameter> conv_w_;
  std::vector<Parameter> conv_b_;
  Parameter hidden_w_, hidden_b_, out_w_, out_b_;
};

struct ImageTrainResult {
  MiniCnn model;
  std::vector<nn::EpochStats> trace;
};

inline ImageTrainResult train_image_model(const MiniCnnConfig& config, std::span<const Tensor> images,
                                          std::span<const std::size_t> labels, const nn::TrainOptions& opt) {
  for (std::size_t y : labels) {
    if (y >= config.classes) throw std::invalid_argument("train_image_model: label " + std::to_string(y) + " >= classes");
  }
  MiniCnn model(config, opt.seed);
  auto trace = nn::train_sgd(model, images, labels, opt);
  return {std::move(model), std::move(trace)};
}

}  // namespace tif::image
