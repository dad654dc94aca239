#pragma once

// Late fusion by logarithmic opinion pool:
//   combined[c] ∝ prod_m posterior_m[c] ^ alpha_m
// evaluated in log space after flooring every posterior at 1e-12.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tif::fusion {

inline constexpr double kPosteriorFloor = 1e-12;

struct FusionWeights {
  std::vector<double> alpha;

  static FusionWeights uniform(std::size_t modalities) {
    return {std::vector<double>(modalities, 1.0 / static_cast<double>(modalities))};
  }

  void validate() const {
    if (alpha.empty()) throw std::invalid_argument("fusion weights: no modalities");
    double sum = 0.0;
    for (double a : alpha) {
      if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("fusion weights: weights must be non-negative");
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("fusion weights: weights must sum to 1");
  }
};

inline std::vector<double> late_fusion_combine(std::span<const std::vector<double>> posteriors,
                                               const FusionWeights& weights) {
  weights.validate();
  if (posteriors.size() != weights.alpha.size()) {
    throw std::invalid_argument("late_fusion_combine: " + std::to_string(posteriors.size()) + " posteriors, " +
                                std::to_string(weights.alpha.size()) + " weights");
  }
  const std::size_t classes = posteriors.front().size();
  if (classes == 0) throw std::invalid_argument("late_fusion_combine: empty posterior");
  for (const auto& p : posteriors) {
    if (p.size() != classes) {
      throw std::invalid_argument("late_fusion_combine: posterior length " + std::to_string(p.size()) + " vs " +
                                  std::to_string(classes));
    }
  }
  // A single unit-weight modality passes through unchanged (up to the floor).
  if (const auto one = std::find(weights.alpha.begin(), weights.alpha.end(), 1.0); one != weights.alpha.end()) {
    std::vector<double> p = posteriors[static_cast<std::size_t>(one - weights.alpha.begin())];
    double sum = 0.0;
    for (double& v : p) sum += (v = std::max(v, kPosteriorFloor));
    if (sum != 1.0)
      for (double& v : p) v /= sum;
    return p;
  }
  std::vector<double> log_pool(classes, 0.0);
  for (std::size_t m = 0; m < posteriors.size(); ++m) {
    if (weights.alpha[m] == 0.0) continue;
    for (std::size_t c = 0; c < classes; ++c)
      log_pool[c] += weights.alpha[m] * std::log(std::max(posteriors[m][c], kPosteriorFloor));
  }
  const double peak = *std::max_element(log_pool.begin(), log_pool.end());
  double z = 0.0;
  for (double& v : log_pool) z += (v = std::exp(v - peak));
  for (double& v : log_pool) v /= z;
  return log_pool;
}

}  // namespace tif::fusion
