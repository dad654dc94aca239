#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tif/nn/checkpoint.hpp"
#include "tif/nn/tensor.hpp"

namespace tif::text {

/// Post-ReLU feature-layer activation of one text.
using FeatureVector = std::vector<double>;

/// Per-dimension min/max of the training-split feature vectors.
struct NormStats {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t size() const noexcept { return min.size(); }

  std::string serialize() const {
    nn::ByteWriter w;
    w.u64(min.size());
    for (double v : min) w.f64(v);
    for (double v : max) w.f64(v);
    return w.bytes();
  }

  static NormStats deserialize(std::string_view bytes) {
    nn::ByteReader r(bytes);
    NormStats s;
    const auto n = r.u64();
    s.min.resize(n);
    s.max.resize(n);
    for (double& v : s.min) v = r.f64();
    for (double& v : s.max) v = r.f64();
    return s;
  }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Exact per-dimension min and max.
inline NormStats compute_norm_stats(std::span<const FeatureVector> features) {
  if (features.empty()) throw std::invalid_argument("compute_norm_stats: no feature vectors");
  NormStats s{features.front(), features.front()};
  for (const auto& f : features) {
    nn::expect_dim("compute_norm_stats", "vector length", f.size(), s.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      s.min[i] = std::min(s.min[i], f[i]);
      s.max[i] = std::max(s.max[i], f[i]);
    }
  }
  return s;
}

}  // namespace tif::text
