#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "tif/nn/tensor.hpp"

namespace tif::nn {

struct OptimizerState {
  double learning_rate = 0.01;
  std::size_t epoch = 0;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// value -= lr * grad for every parameter, then zero the grads. If any
/// gradient entry is non-finite nothing is modified and NonFiniteGradient is
/// thrown.
inline void sgd_step(std::span<Parameter* const> params, const OptimizerState& state) {
  if (!(state.learning_rate > 0.0) || !std::isfinite(state.learning_rate)) {
    throw std::invalid_argument("sgd_step: learning rate must be positive and finite");
  }
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) throw NonFiniteGradient("sgd_step: non-finite gradient in " + p->name);
  }
  for (Parameter* p : params) {
    auto v = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= state.learning_rate * g[i];
    p->zero_grad();
  }
}

inline void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace tif::nn
