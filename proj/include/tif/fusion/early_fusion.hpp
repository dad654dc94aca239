#pragma once

// Early fusion: multinomial logistic regression on [text features || image
// features], trained with the same per-example SGD loop as the CNNs.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/nn/layers.hpp"
#include "tif/nn/random.hpp"
#include "tif/nn/train.hpp"

namespace tif::fusion {

using nn::Parameter;
using nn::Tensor;

inline std::vector<double> concat_features(std::span<const double> text, std::span<const double> image) {
  std::vector<double> v(text.begin(), text.end());
  v.insert(v.end(), image.begin(), image.end());
  return v;
}

class LinearModel {
 public:
  LinearModel(std::size_t text_width, std::size_t image_width, std::size_t classes, std::uint64_t seed)
      : text_width_(text_width), image_width_(image_width) {
    if (text_width + image_width == 0 || classes == 0) throw std::invalid_argument("linear model: empty dimensions");
    nn::Rng rng(seed);
    weight_ = Parameter("weight", Tensor({classes, text_width + image_width}));
    nn::glorot_uniform(weight_.value, text_width + image_width, classes, rng);
    bias_ = Parameter("bias", Tensor({classes}));
  }

  std::size_t text_width() const noexcept { return text_width_; }
  std::size_t image_width() const noexcept { return image_width_; }
  std::size_t input_width() const noexcept { return text_width_ + image_width_; }
  std::size_t classes() const noexcept { return bias_.value.size(); }

  Parameter& weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }
  const Parameter& weight() const noexcept { return weight_; }
  const Parameter& bias() const noexcept { return bias_; }

  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }

  Tensor logits(const Tensor& x) const {
    nn::expect_dim("early fusion", "feature width", x.size(), input_width());
    return nn::dense(x, weight_, bias_);
  }

  Tensor posterior(const Tensor& x) const { return nn::softmax(logits(x)); }

  Tensor posterior(std::span<const double> concatenated) const {
    return posterior(Tensor({concatenated.size()}, {concatenated.begin(), concatenated.end()}));
  }

  nn::ExampleResult accumulate(const Tensor& x, std::size_t label) {
    const auto sx = nn::softmax_xent(logits(x), label);
    nn::dense_backward(x, nn::softmax_xent_backward(sx.probs, label), weight_, bias_);
    return {sx.loss, nn::argmax(sx.probs.data())};
  }

 private:
  std::size_t text_width_;
  std::size_t image_width_;
  Parameter weight_;
  Parameter bias_;
};

struct EarlyFusionResult {
  LinearModel model;
  std::vector<nn::EpochStats> trace;
};

inline EarlyFusionResult early_fusion_train(std::span<const std::vector<double>> text_features,
                                            std::span<const std::vector<double>> image_features,
                                            std::span<const std::size_t> labels, std::size_t classes,
                                            const nn::TrainOptions& opt) {
  if (text_features.size() != image_features.size() || text_features.size() != labels.size()) {
    throw std::invalid_argument("early_fusion_train: feature lists are not aligned");
  }
  if (text_features.empty()) throw std::invalid_argument("early_fusion_train: empty dataset");
  const std::size_t tw = text_features.front().size(), iw = image_features.front().size();
  std::vector<std::pair<std::vector<double>, std::size_t>> samples;
  samples.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    nn::expect_dim("early_fusion_train", "text feature width", text_features[i].size(), tw);
    nn::expect_dim("early_fusion_train", "image feature width", image_features[i].size(), iw);
    samples.emplace_back(concat_features(text_features[i], image_features[i]), labels[i]);
  }
  // Canonical order before the seeded shuffle: the trained model does not
  // depend on how the caller ordered the samples.
  std::sort(samples.begin(), samples.end());
  std::vector<Tensor> inputs;
  std::vector<std::size_t> sorted_labels;
  for (auto& [v, y] : samples) {
    const std::size_t n = v.size();
    inputs.emplace_back(nn::Shape{n}, std::move(v));
    sorted_labels.push_back(y);
  }
  LinearModel model(tw, iw, classes, opt.seed);
  auto trace = nn::train_sgd(model, std::span<const Tensor>(inputs), std::span<const std::size_t>(sorted_labels), opt);
  return {std::move(model), std::move(trace)};
}

inline Tensor early_fusion_predict(const LinearModel& model, std::span<const double> concatenated) {
  if (concatenated.size() != model.input_width()) {
    throw std::invalid_argument("early_fusion_predict: feature width " + std::to_string(concatenated.size()) +
                                " differs from trained width " + std::to_string(model.input_width()));
  }
  return model.posterior(concatenated);
}

}  // namespace tif::fusion
