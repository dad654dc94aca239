#pragma once

// Kim-style sentence CNN: embedding, parallel 1-D convolutions of several
// widths with max-over-time pooling, a feature layer of 3*Ht*Wt units whose
// post-ReLU activation is the vector painted onto images, and a softmax head.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/nn/checkpoint.hpp"
#include "tif/nn/layer_spec.hpp"
#include "tif/nn/layers.hpp"
#include "tif/nn/random.hpp"
#include "tif/nn/train.hpp"
#include "tif/text/features.hpp"
#include "tif/text/vocabulary.hpp"
#include "tif/util/kv_config.hpp"

namespace tif::text {

using nn::Parameter;
using nn::Tensor;
using TokenIds = std::vector<std::size_t>;

struct TextModelConfig {
  std::size_t seq_len = 100;
  std::size_t embed_width = 128;
  std::vector<std::size_t> filter_sizes{3, 4, 5};
  std::size_t filters_per_size = 128;
  std::size_t conv_padding = 0;
  std::size_t grid_h = 10;
  std::size_t grid_w = 10;
  std::size_t classes = 2;

  std::size_t feature_length() const noexcept { return 3 * grid_h * grid_w; }
  std::size_t concat_width() const noexcept { return filter_sizes.size() * filters_per_size; }

  void validate() const {
    auto positive = [](std::size_t v, const char* what) {
      if (v == 0) throw std::invalid_argument(std::string("text model config: ") + what + " must be positive");
    };
    positive(seq_len, "seq_len");
    positive(embed_width, "embed_width");
    positive(filters_per_size, "filters_per_size");
    positive(grid_h, "grid_h");
    positive(grid_w, "grid_w");
    positive(classes, "classes");
    if (filter_sizes.empty()) throw std::invalid_argument("text model config: filter_sizes is empty");
    for (std::size_t k : filter_sizes) {
      positive(k, "filter size");
      if (k > seq_len + 2 * conv_padding) {
        throw std::invalid_argument("text model config: filter size " + std::to_string(k) +
                                    " exceeds seq_len " + std::to_string(seq_len));
      }
    }
  }

  KvConfig to_kv() const {
    KvConfig kv;
    kv.set("text.seq_len", std::to_string(seq_len));
    kv.set("text.embed_width", std::to_string(embed_width));
    std::string sizes;
    for (std::size_t i = 0; i < filter_sizes.size(); ++i) sizes += (i ? "," : "") + std::to_string(filter_sizes[i]);
    kv.set("text.filter_sizes", sizes);
    kv.set("text.filters_per_size", std::to_string(filters_per_size));
    kv.set("text.conv_padding", std::to_string(conv_padding));
    kv.set("text.grid_h", std::to_string(grid_h));
    kv.set("text.grid_w", std::to_string(grid_w));
    kv.set("text.classes", std::to_string(classes));
    return kv;
  }

  static TextModelConfig from_kv(const KvConfig& kv) { return from_kv(kv, TextModelConfig{}); }
  static TextModelConfig from_kv(const KvConfig& kv, TextModelConfig base) {
    TextModelConfig c = base;
    c.seq_len = kv.get_uint("text.seq_len", c.seq_len);
    c.embed_width = kv.get_uint("text.embed_width", c.embed_width);
    const auto sizes = kv.get_uint_list("text.filter_sizes", {c.filter_sizes.begin(), c.filter_sizes.end()});
    c.filter_sizes.assign(sizes.begin(), sizes.end());
    c.filters_per_size = kv.get_uint("text.filters_per_size", c.filters_per_size);
    c.conv_padding = kv.get_uint("text.conv_padding", c.conv_padding);
    c.grid_h = kv.get_uint("text.grid_h", c.grid_h);
    c.grid_w = kv.get_uint("text.grid_w", c.grid_w);
    c.classes = kv.get_uint("text.classes", c.classes);
    return c;
  }

  friend bool operator==(const TextModelConfig&, const TextModelConfig&) = default;
};

class TextCnn {
 public:
  /// Intermediate activations of one forward pass.
  struct Activations {
    Tensor embedded;                        // [S x w]
    std::vector<Tensor> conv;               // per branch, pre-ReLU [T_k x F]
    std::vector<nn::MaxOverTime> pooled;    // per branch, over ReLU(conv)
    Tensor concat;                          // [branches * F]
    Tensor feature_pre;                     // [L]
    Tensor feature;                         // [L], post-ReLU
    Tensor logits;                          // [C]
  };

  TextCnn(TextModelConfig config, std::size_t vocab_size, std::uint64_t seed)
      : config_(std::move(config)), vocab_size_(vocab_size) {
    config_.validate();
    if (vocab_size_ < 2) throw std::invalid_argument("text model: vocabulary must hold PAD and OOV");
    const std::size_t w = config_.embed_width, nf = config_.filters_per_size;
    nn::Rng rng(seed);
    embedding_ = Parameter("embedding", Tensor({vocab_size_, w}));
    nn::glorot_uniform(embedding_.value, vocab_size_, w, rng);
    for (std::size_t k : config_.filter_sizes) {
      Parameter filt("conv" + std::to_string(k) + ".weight", Tensor({nf, k, w}));
      nn::glorot_uniform(filt.value, k * w, nf, rng);
      conv_w_.push_back(std::move(filt));
      conv_b_.emplace_back("conv" + std::to_string(k) + ".bias", Tensor({nf}));
    }
    const std::size_t concat = config_.concat_width(), feat = config_.feature_length();
    feat_w_ = Parameter("feature.weight", Tensor({feat, concat}));
    nn::glorot_uniform(feat_w_.value, concat, feat, rng);
    feat_b_ = Parameter("feature.bias", Tensor({feat}));
    out_w_ = Parameter("output.weight", Tensor({config_.classes, feat}));
    nn::glorot_uniform(out_w_.value, feat, config_.classes, rng);
    out_b_ = Parameter("output.bias", Tensor({config_.classes}));
  }

  const TextModelConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps{&embedding_};
    for (std::size_t b = 0; b < conv_w_.size(); ++b) {
      ps.push_back(&conv_w_[b]);
      ps.push_back(&conv_b_[b]);
    }
    for (Parameter* p : {&feat_w_, &feat_b_, &out_w_, &out_b_}) ps.push_back(p);
    return ps;
  }

  std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<TextCnn*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->value.size();
    return n;
  }

  /// Layer plan; node shapes follow from nn::infer_shapes(plan(), {S}).
  std::vector<nn::LayerSpec> plan() const {
    using nn::LayerKind;
    std::vector<nn::LayerSpec> p;
    p.push_back({LayerKind::Embedding, "embedding", 0, 1, 0, vocab_size_, config_.embed_width, {-1}});
    std::vector<int> pools;
    for (std::size_t k : config_.filter_sizes) {
      const int at = static_cast<int>(p.size());
      const std::string tag = std::to_string(k);
      p.push_back({LayerKind::Conv1D, "conv" + tag, k, 1, config_.conv_padding, k * config_.embed_width,
                   config_.filters_per_size, {0}});
      p.push_back({LayerKind::ReLU, "relu" + tag, 0, 1, 0, 0, 0, {at}});
      p.push_back({LayerKind::MaxOverTime, "pool" + tag, 0, 1, 0, 0, 0, {at + 1}});
      pools.push_back(at + 2);
    }
    const int concat = static_cast<int>(p.size());
    p.push_back({LayerKind::Concat, "concat", 0, 1, 0, 0, config_.concat_width(), pools});
    p.push_back({LayerKind::Dense, "feature", 0, 1, 0, config_.concat_width(), config_.feature_length(), {concat}});
    p.push_back({LayerKind::ReLU, "feature_relu", 0, 1, 0, 0, 0, {concat + 1}});
    p.push_back({LayerKind::Dense, "output", 0, 1, 0, config_.feature_length(), config_.classes, {concat + 2}});
    p.push_back({LayerKind::SoftmaxXent, "softmax", 0, 1, 0, 0, 0, {concat + 3}});
    return p;
  }

  Activations forward(std::span<const std::size_t> ids) const {
    nn::expect_dim("text model", "sequence length", ids.size(), config_.seq_len);
    Activations a;
    a.embedded = nn::embedding(ids, embedding_);
    std::vector<Tensor> pooled;
    for (std::size_t b = 0; b < conv_w_.size(); ++b) {
      a.conv.push_back(nn::conv1d(a.embedded, conv_w_[b], conv_b_[b], {1, config_.conv_padding}));
      a.pooled.push_back(nn::max_over_time(nn::relu(a.conv.back())));
      pooled.push_back(a.pooled.back().output);
    }
    a.concat = nn::concat(pooled);
    a.feature_pre = nn::dense(a.concat, feat_w_, feat_b_);
    a.feature = nn::relu(a.feature_pre);
    a.logits = nn::dense(a.feature, out_w_, out_b_);
    return a;
  }

  /// Backpropagates d loss / d logits through the activations of `forward`.
  void backward(std::span<const std::size_t> ids, const Activations& a, const Tensor& grad_logits) {
    Tensor g_feat = nn::dense_backward(a.feature, grad_logits, out_w_, out_b_);
    Tensor g_feat_pre = nn::relu_backward(a.feature_pre, g_feat);
    Tensor g_concat = nn::dense_backward(a.concat, g_feat_pre, feat_w_, feat_b_);
    Tensor g_embedded(a.embedded.shape());
    const std::size_t nf = config_.filters_per_size;
    for (std::size_t b = 0; b < conv_w_.size(); ++b) {
      Tensor g_pool({nf});
      std::copy_n(g_concat.data().begin() + static_cast<std::ptrdiff_t>(b * nf), nf, g_pool.data().begin());
      Tensor g_act = nn::max_over_time_backward(g_pool, a.pooled[b].argmax, a.conv[b].dim(0));
      Tensor g_conv = nn::relu_backward(a.conv[b], g_act);
      Tensor g_in = nn::conv1d_backward(a.embedded, g_conv, conv_w_[b], conv_b_[b], {1, config_.conv_padding});
      for (std::size_t i = 0; i < g_in.size(); ++i) g_embedded[i] += g_in[i];
    }
    nn::embedding_backward(ids, g_embedded, embedding_);
  }

  nn::ExampleResult accumulate(const TokenIds& ids, std::size_t label) {
    const Activations a = forward(ids);
    const auto sx = nn::softmax_xent(a.logits, label);
    backward(ids, a, nn::softmax_xent_backward(sx.probs, label));
    return {sx.loss, nn::argmax(sx.probs.data())};
  }

  double loss(const TokenIds& ids, std::size_t label) const {
    return nn::softmax_xent(forward(ids).logits, label).loss;
  }

  Tensor posteriors(std::span<const std::size_t> ids) const { return nn::softmax(forward(ids).logits); }

  std::size_t predict(std::span<const std::size_t> ids) const { return nn::argmax(forward(ids).logits.data()); }

  /// Post-ReLU activation of the feature layer (length 3*Ht*Wt).
  FeatureVector features(std::span<const std::size_t> ids) const {
    return forward(ids).feature.values();
  }

  void write_to(nn::Checkpoint& ck) const {
    ck.model_kind = "text-cnn";
    ck.config = config_.to_kv().serialize();
    ck.layers = plan();
    ck.params.clear();
    for (const Parameter* p : parameters()) ck.params.push_back({p->name, p->value});
  }

  static TextCnn read_from(const nn::Checkpoint& ck) {
    if (ck.model_kind != "text-cnn") throw nn::CheckpointError("expected a text-cnn checkpoint, got " + ck.model_kind);
    const auto cfg = TextModelConfig::from_kv(KvConfig::parse(ck.config));
    const std::size_t vocab = ck.param("embedding").dim(0);
    TextCnn m(cfg, vocab, 0);
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
  TextModelConfig config_;
  std::size_t vocab_size_;
  Parameter embedding_;
  std::vector<Parameter> conv_w_;
  std::vector<Parameter> conv_b_;
  Parameter feat_w_, feat_b_, out_w_, out_b_;
};

// ---------------------------------------------------------------------------
// Trained text model bundle: weights, vocabulary, and (once computed) the
// training-split normalisation statistics.

struct TextArtifact {
  TextCnn model;
  Vocabulary vocab;
  std::optional<NormStats> norm;
  std::string geometry;  // key = value text, set once a fused dataset is produced

  TokenIds encode(std::string_view text) const { return vocab.encode(text, model.config().seq_len); }

  /// Feature vectors for `texts`; no parameters change.
  std::vector<FeatureVector> extract_features(std::span<const std::string> texts) const {
    if (vocab.size() != model.vocab_size()) {
      throw std::invalid_argument("extract_features: vocabulary has " + std::to_string(vocab.size()) +
                                  " tokens, model expects " + std::to_string(model.vocab_size()));
    }
    std::vector<FeatureVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(model.features(encode(t)));
    return out;
  }

  nn::Checkpoint to_checkpoint() const {
    nn::Checkpoint ck;
    model.write_to(ck);
    ck.sections["vocab"] = vocab.serialize();
    if (norm) ck.sections["norm_stats"] = norm->serialize();
    if (!geometry.empty()) ck.sections["geometry"] = geometry;
    return ck;
  }

  static TextArtifact from_checkpoint(const nn::Checkpoint& ck) {
    const auto vit = ck.sections.find("vocab");
    if (vit == ck.sections.end()) throw nn::CheckpointError("text checkpoint has no vocabulary");
    TextArtifact a{TextCnn::read_from(ck), Vocabulary::deserialize(vit->second), std::nullopt, {}};
    if (a.vocab.size() != a.model.vocab_size()) {
      throw nn::CheckpointError("vocabulary size does not match embedding rows");
    }
    if (auto it = ck.sections.find("norm_stats"); it != ck.sections.end()) a.norm = NormStats::deserialize(it->second);
    if (auto it = ck.sections.find("geometry"); it != ck.sections.end()) a.geometry = it->second;
    return a;
  }
};

struct TextTrainResult {
  TextArtifact artifact;
  std::vector<nn::EpochStats> trace;
};

/// Trains from a seeded initialisation over a fixed vocabulary and attaches
/// training-split NormStats.
inline TextTrainResult train_text_model(const TextModelConfig& config, Vocabulary vocab,
                                        std::span<const std::string> texts, std::span<const std::size_t> labels,
                                        const nn::TrainOptions& opt) {
  if (texts.empty()) throw std::invalid_argument("train_text_model: empty dataset");
  for (std::size_t y : labels) {
    if (y >= config.classes) throw std::invalid_argument("train_text_model: label " + std::to_string(y) + " >= classes");
  }
  TextCnn model(config, vocab.size(), opt.seed);
  std::vector<TokenIds> ids;
  ids.reserve(texts.size());
  for (const auto& t : texts) ids.push_back(vocab.encode(t, config.seq_len));
  auto trace = nn::train_sgd(model, std::span<const TokenIds>(ids), labels, opt);
  TextArtifact art{std::move(model), std::move(vocab), std::nullopt, {}};
  art.norm = compute_norm_stats(art.extract_features(texts));
  return {std::move(art), std::move(trace)};
}

/// Same, building the vocabulary from `texts` first.
inline TextTrainResult train_text_model(const TextModelConfig& config, std::span<const std::string> texts,
                                        std::span<const std::size_t> labels, const nn::TrainOptions& opt,
                                        std::size_t min_frequency = 1) {
  if (texts.empty()) throw std::invalid_argument("train_text_model: empty dataset");
  return train_text_model(config, Vocabulary::build(texts, min_frequency), texts, labels, opt);
}

}  // namespace tif::text
