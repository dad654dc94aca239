#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tif/nn/random.hpp"
#include "tif/nn/sgd.hpp"

namespace tif::nn {

/// Loss and arg-max prediction for one example, gradients already accumulated.
struct ExampleResult {
  double loss = 0.0;
  std::size_t predicted = 0;
};

template <class M, class Input>
concept SgdTrainable = requires(M m, const Input& x, std::size_t y) {
  { m.accumulate(x, y) } -> std::same_as<ExampleResult>;
  { m.parameters() } -> std::same_as<std::vector<Parameter*>>;
};

struct TrainOptions {
  std::size_t epochs = 60;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  bool stop_at_perfect_accuracy = true;

  friend bool operator==(const TrainOptions&, const TrainOptions&) = default;
};

/// Mean loss and accuracy observed while sweeping the epoch (each example is
/// scored before its own update).
struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seed of the shuffle stream; kept apart from the initialisation stream.
inline std::uint64_t shuffle_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

/// Per-example SGD over a seeded shuffle. Stops early once an epoch scores
/// every example correctly (when enabled).
template <class Model, class Input>
  requires SgdTrainable<Model, Input>
std::vector<EpochStats> train_sgd(Model& model, std::span<const Input> inputs,
                                  std::span<const std::size_t> labels, const TrainOptions& opt) {
  if (inputs.size() != labels.size()) throw std::invalid_argument("train_sgd: inputs/labels size mismatch");
  if (inputs.empty()) throw std::invalid_argument("train_sgd: empty dataset");
  std::vector<Parameter*> params = model.parameters();
  zero_grads(params);
  Rng rng(shuffle_seed(opt.seed));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  OptimizerState state{opt.learning_rate, 0};
  std::vector<EpochStats> trace;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    state.epoch = epoch;
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t n = 0; n < order.size(); ++n) {
      const std::size_t i = order[n];
      const ExampleResult r = model.accumulate(inputs[i], labels[i]);
      if (!std::isfinite(r.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", sample " +
                            std::to_string(i));
      }
      try {
        sgd_step(params, state);
      } catch (const NonFiniteGradient& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch + 1) +
                            ", sample " + std::to_string(i));
      }
      loss_sum += r.loss;
      if (r.predicted == labels[i]) ++correct;
    }
    const auto n = static_cast<double>(inputs.size());
    trace.push_back({epoch + 1, loss_sum / n, static_cast<double>(correct) / n});
    if (opt.stop_at_perfect_accuracy && correct == inputs.size()) break;
  }
  return trace;
}

inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace tif::nn
