#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>

#include "tif/nn/sgd.hpp"
#include "tif/nn/tensor.hpp"

namespace tif::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;  // max |g_a - g_n|, for judging roundoff
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

/// Compares analytic gradients against central differences.
///
/// `loss` evaluates the scalar objective from the current parameter values.
/// `backward` must evaluate the objective and accumulate its gradient into
/// every Parameter::grad (grads are zeroed here first).
///
/// Per entry: |g_a - g_n| / max(1e-8, |g_a| + |g_n|), maximised over all.
inline GradCheckReport grad_check(const std::function<double()>& loss,
                                  const std::function<void()>& backward,
                                  std::span<Parameter* const> params, double h = 1e-6) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  zero_grads(params);
  backward();
  GradCheckReport report;
  for (Parameter* p : params) {
    auto v = p->value.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const double up = loss();
      v[i] = saved - h;
      const double down = loss();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double err =
          std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++report.entries_checked;
      report.max_absolute_error = std::max(report.max_absolute_error, std::abs(analytic - numeric));
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = p->name;
        report.worst_index = i;
      }
    }
  }
  zero_grads(params);
  return report;
}

}  // namespace tif::nn
