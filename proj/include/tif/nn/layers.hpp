#pragma once

// Forward/backward kernels for the fixed layer set used by the text and image
// classifiers. Every backward call accumulates (+=) into Parameter::grad and
// returns the gradient with respect to the layer input.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tif/nn/tensor.hpp"

namespace tif::nn {

// ---------------------------------------------------------------------------
// Embedding

/// ids -> [S x w] rows of `table` ([V x w]).
inline Tensor embedding(std::span<const std::size_t> ids, const Parameter& table) {
  if (table.value.rank() != 2) throw ShapeError("embedding: table must be rank 2");
  if (ids.empty()) throw ShapeError("embedding: sequence length is 0");
  const std::size_t vocab = table.value.dim(0), width = table.value.dim(1);
  Tensor out({ids.size(), width});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= vocab) {
      throw ShapeError("embedding: id " + std::to_string(ids[t]) + " at position " +
                       std::to_string(t) + " exceeds vocabulary size " + std::to_string(vocab));
    }
    std::copy_n(table.value.data().begin() + static_cast<std::ptrdiff_t>(ids[t] * width), width,
                out.data().begin() + static_cast<std::ptrdiff_t>(t * width));
  }
  return out;
}

inline void embedding_backward(std::span<const std::size_t> ids, const Tensor& grad_out,
                               Parameter& table) {
  const std::size_t width = table.value.dim(1);
  expect_dim("embedding_backward", "grad rows", grad_out.dim(0), ids.size());
  auto g = table.grad.data();
  for (std::size_t t = 0; t < ids.size(); ++t) {
    for (std::size_t j = 0; j < width; ++j) g[ids[t] * width + j] += grad_out(t, j);
  }
}

// ---------------------------------------------------------------------------
// Conv1D over a [S x w] sequence with F filters of shape [k x w].

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

inline std::size_t conv1d_output_length(std::size_t seq, std::size_t kernel, Conv1dOptions opt) {
  if (opt.stride == 0) throw ShapeError("conv1d: stride must be positive");
  if (seq + 2 * opt.padding < kernel) {
    throw ShapeError("conv1d: sequence length " + std::to_string(seq) + " with padding " +
                     std::to_string(opt.padding) + " is shorter than kernel " +
                     std::to_string(kernel));
  }
  return (seq + 2 * opt.padding - kernel) / opt.stride + 1;
}

namespace detail {
inline void check_conv1d(const Tensor& input, const Parameter& filters, const Parameter& bias) {
  if (input.rank() != 2) throw ShapeError("conv1d: input must be [S x w]");
  if (filters.value.rank() != 3) throw ShapeError("conv1d: filters must be [F x k x w]");
  expect_dim("conv1d", "filter width", filters.value.dim(2), input.dim(1));
  expect_dim("conv1d", "bias length", bias.value.size(), filters.value.dim(0));
}
}  // namespace detail

inline Tensor conv1d(const Tensor& input, const Parameter& filters, const Parameter& bias,
                     Conv1dOptions opt = {}) {
  detail::check_conv1d(input, filters, bias);
  const std::size_t seq = input.dim(0), width = input.dim(1);
  const std::size_t nf = filters.value.dim(0), k = filters.value.dim(1);
  const std::size_t len = conv1d_output_length(seq, k, opt);
  Tensor out({len, nf});
  const auto w = filters.value.data();
  const auto x = input.data();
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      double acc = bias.value[f];
      for (std::size_t i = 0; i < k; ++i) {
        const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(t * opt.stride + i) -
                                   static_cast<std::ptrdiff_t>(opt.padding);
        if (row < 0 || row >= static_cast<std::ptrdiff_t>(seq)) continue;
        const double* xr = x.data() + static_cast<std::size_t>(row) * width;
        const double* wr = w.data() + (f * k + i) * width;
        for (std::size_t j = 0; j < width; ++j) acc += xr[j] * wr[j];
      }
      out(t, f) = acc;
    }
  }
  return out;
}

inline Tensor conv1d_backward(const Tensor& input, const Tensor& grad_out, Parameter& filters,
                              Parameter& bias, Conv1dOptions opt = {}) {
  detail::check_conv1d(input, filters, bias);
  const std::size_t seq = input.dim(0), width = input.dim(1);
  const std::size_t nf = filters.value.dim(0), k = filters.value.dim(1);
  const std::size_t len = conv1d_output_length(seq, k, opt);
  expect_dim("conv1d_backward", "grad length", grad_out.dim(0), len);
  expect_dim("conv1d_backward", "grad filters", grad_out.dim(1), nf);
  Tensor grad_in(input.shape());
  const auto w = filters.value.data();
  auto gw = filters.grad.data();
  const auto x = input.data();
  auto gx = grad_in.data();
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      const double g = grad_out(t, f);
      if (g == 0.0) continue;
      bias.grad[f] += g;
      for (std::size_t i = 0; i < k; ++i) {
        const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(t * opt.stride + i) -
                                   static_cast<std::ptrdiff_t>(opt.padding);
        if (row < 0 || row >= static_cast<std::ptrdiff_t>(seq)) continue;
        const std::size_t xo = static_cast<std::size_t>(row) * width;
        const std::size_t wo = (f * k + i) * width;
        for (std::size_t j = 0; j < width; ++j) {
          gw[wo + j] += g * x[xo + j];
          gx[xo + j] += g * w[wo + j];
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Max over the time axis of a [T x F] tensor. Ties go to the lowest index.

struct MaxOverTime {
  Tensor output;                   // [F]
  std::vector<std::size_t> argmax; // per feature, winning time step
};

inline MaxOverTime max_over_time(const Tensor& input) {
  if (input.rank() != 2) throw ShapeError("max_over_time: input must be [T x F]");
  const std::size_t steps = input.dim(0), nf = input.dim(1);
  MaxOverTime r{Tensor({nf}), std::vector<std::size_t>(nf, 0)};
  for (std::size_t f = 0; f < nf; ++f) {
    double best = input(0, f);
    std::size_t at = 0;
    for (std::size_t t = 1; t < steps; ++t) {
      if (input(t, f) > best) {
        best = input(t, f);
        at = t;
      }
    }
    r.output[f] = best;
    r.argmax[f] = at;
  }
  return r;
}

inline Tensor max_over_time_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                                     std::size_t steps) {
  expect_dim("max_over_time_backward", "grad length", grad_out.size(), argmax.size());
  Tensor grad_in({steps, argmax.size()});
  for (std::size_t f = 0; f < argmax.size(); ++f) grad_in(argmax[f], f) += grad_out[f];
  return grad_in;
}

// ---------------------------------------------------------------------------
// Dense: y = W x + b with W [m x n].

inline Tensor dense(const Tensor& input, const Parameter& weight, const Parameter& bias) {
  if (weight.value.rank() != 2) throw ShapeError("dense: weight must be [m x n]");
  const std::size_t m = weight.value.dim(0), n = weight.value.dim(1);
  expect_dim("dense", "input length", input.size(), n);
  expect_dim("dense", "bias length", bias.value.size(), m);
  Tensor out({m});
  const auto w = weight.value.data();
  const auto x = input.data();
  for (std::size_t r = 0; r < m; ++r) {
    double acc = bias.value[r];
    const double* wr = w.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
  return out;
}

inline Tensor dense_backward(const Tensor& input, const Tensor& grad_out, Parameter& weight,
                             Parameter& bias) {
  const std::size_t m = weight.value.dim(0), n = weight.value.dim(1);
  expect_dim("dense_backward", "input length", input.size(), n);
  expect_dim("dense_backward", "grad length", grad_out.size(), m);
  Tensor grad_in(input.shape());
  const auto w = weight.value.data();
  auto gw = weight.grad.data();
  const auto x = input.data();
  auto gx = grad_in.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double g = grad_out[r];
    bias.grad[r] += g;
    if (g == 0.0) continue;
    double* gwr = gw.data() + r * n;
    const double* wr = w.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) {
      gwr[c] += g * x[c];
      gx[c] += g * wr[c];
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// ReLU. Subgradient at 0 is 0.

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  expect_dim("relu_backward", "grad size", grad_out.size(), input.size());
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < input.size(); ++i)
    if (!(input[i] > 0.0)) grad_in[i] = 0.0;
  return grad_in;
}

// ---------------------------------------------------------------------------
// Softmax + cross-entropy.

struct SoftmaxXent {
  double loss = 0.0;
  Tensor probs;
};

inline Tensor softmax(const Tensor& logits) {
  if (logits.empty()) throw ShapeError("softmax: no classes");
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  Tensor p({logits.size()});
  double z = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - peak);
    z += p[c];
  }
  for (double& v : p.data()) v /= z;
  return p;
}

inline SoftmaxXent softmax_xent(const Tensor& logits, std::size_t true_class) {
  if (true_class >= logits.size()) {
    throw ShapeError("softmax_xent: class " + std::to_string(true_class) + " out of range for " +
                     std::to_string(logits.size()) + " logits");
  }
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  double z = 0.0;
  for (double v : logits.data()) z += std::exp(v - peak);
  const double log_z = std::log(z);
  SoftmaxXent r{log_z - (logits[true_class] - peak), Tensor({logits.size()})};
  for (std::size_t c = 0; c < logits.size(); ++c) r.probs[c] = std::exp(logits[c] - peak - log_z);
  if (r.loss < 0.0) r.loss = 0.0;  // -log p with p rounded to slightly above 1
  return r;
}

/// d loss / d logits = probs - onehot(true_class).
inline Tensor softmax_xent_backward(const Tensor& probs, std::size_t true_class) {
  Tensor g = probs;
  g[true_class] -= 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// Conv2D on [H x W x Cin] with filters [F x kh x kw x Cin].

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

inline std::size_t conv_output_extent(const char* op, std::size_t in, std::size_t kernel,
                                      std::size_t stride, std::size_t padding) {
  if (stride == 0) throw ShapeError(std::string(op) + ": stride must be positive");
  if (in + 2 * padding < kernel) {
    throw ShapeError(std::string(op) + ": input extent " + std::to_string(in) +
                     " is smaller than window " + std::to_string(kernel));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace detail {
inline void check_conv2d(const Tensor& input, const Parameter& filters, const Parameter& bias) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be [H x W x C]");
  if (filters.value.rank() != 4) throw ShapeError("conv2d: filters must be [F x kh x kw x C]");
  expect_dim("conv2d", "filter channels", filters.value.dim(3), input.dim(2));
  expect_dim("conv2d", "bias length", bias.value.size(), filters.value.dim(0));
}
}  // namespace detail

inline Tensor conv2d(const Tensor& input, const Parameter& filters, const Parameter& bias,
                     Conv2dOptions opt = {}) {
  detail::check_conv2d(input, filters, bias);
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t nf = filters.value.dim(0), kh = filters.value.dim(1), kw = filters.value.dim(2);
  const std::size_t oh = conv_output_extent("conv2d", h, kh, opt.stride, opt.padding);
  const std::size_t ow = conv_output_extent("conv2d", w, kw, opt.stride, opt.padding);
  Tensor out({oh, ow, nf});
  const double* x = input.data().data();
  const double* wt = filters.value.data().data();
  double* y = out.data().data();
  const auto pad = static_cast<std::ptrdiff_t>(opt.padding);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* yo = y + (oy * ow + ox) * nf;
      for (std::size_t f = 0; f < nf; ++f) yo[f] = bias.value[f];
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * opt.stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * opt.stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* xp = x + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          for (std::size_t f = 0; f < nf; ++f) {
            const double* wp = wt + ((f * kh + ky) * kw + kx) * cin;
            double acc = 0.0;
            for (std::size_t c = 0; c < cin; ++c) acc += xp[c] * wp[c];
            yo[f] += acc;
          }
        }
      }
    }
  }
  return out;
}

/// Returns the input gradient unless `need_input_grad` is false, in which case
/// an empty tensor is returned and only parameter gradients are accumulated.
inline Tensor conv2d_backward(const Tensor& input, const Tensor& grad_out, Parameter& filters,
                              Parameter& bias, Conv2dOptions opt = {}, bool need_input_grad = true) {
  detail::check_conv2d(input, filters, bias);
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t nf = filters.value.dim(0), kh = filters.value.dim(1), kw = filters.value.dim(2);
  const std::size_t oh = conv_output_extent("conv2d", h, kh, opt.stride, opt.padding);
  const std::size_t ow = conv_output_extent("conv2d", w, kw, opt.stride, opt.padding);
  if (grad_out.shape() != Shape{oh, ow, nf}) {
    throw ShapeError("conv2d_backward: grad shape " + to_string(grad_out.shape()) + ", expected " +
                     to_string({oh, ow, nf}));
  }
  Tensor grad_in = need_input_grad ? Tensor(input.shape()) : Tensor();
  const double* x = input.data().data();
  const double* wt = filters.value.data().data();
  double* gw = filters.grad.data().data();
  double* gx = need_input_grad ? grad_in.data().data() : nullptr;
  const double* gy = grad_out.data().data();
  const auto pad = static_cast<std::ptrdiff_t>(opt.padding);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double* go = gy + (oy * ow + ox) * nf;
      for (std::size_t f = 0; f < nf; ++f) bias.grad[f] += go[f];
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * opt.stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * opt.stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t xo = (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          for (std::size_t f = 0; f < nf; ++f) {
            const double g = go[f];
            if (g == 0.0) continue;
            const std::size_t wo = ((f * kh + ky) * kw + kx) * cin;
            for (std::size_t c = 0; c < cin; ++c) gw[wo + c] += g * x[xo + c];
            if (gx)
              for (std::size_t c = 0; c < cin; ++c) gx[xo + c] += g * wt[wo + c];
          }
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// MaxPool2D on [H x W x C]. Ties go to the first position in raster order.

struct MaxPool2d {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

inline MaxPool2d maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  if (input.rank() != 3) throw ShapeError("maxpool2d: input must be [H x W x C]");
  if (window == 0) throw ShapeError("maxpool2d: window must be positive");
  const std::size_t h = input.dim(0), w = input.dim(1), ch = input.dim(2);
  const std::size_t oh = conv_output_extent("maxpool2d", h, window, stride, 0);
  const std::size_t ow = conv_output_extent("maxpool2d", w, window, stride, 0);
  MaxPool2d r{Tensor({oh, ow, ch}), std::vector<std::size_t>(oh * ow * ch)};
  const auto x = input.data();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t c = 0; c < ch; ++c) {
        std::size_t best_at = ((oy * stride) * w + ox * stride) * ch + c;
        double best = x[best_at];
        for (std::size_t ky = 0; ky < window; ++ky) {
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t at = ((oy * stride + ky) * w + ox * stride + kx) * ch + c;
            if (x[at] > best) {
              best = x[at];
              best_at = at;
            }
          }
        }
        const std::size_t o = (oy * ow + ox) * ch + c;
        r.output[o] = best;
        r.argmax[o] = best_at;
      }
    }
  }
  return r;
}

inline Tensor maxpool2d_backward(const Shape& input_shape, const Tensor& grad_out,
                                 std::span<const std::size_t> argmax) {
  expect_dim("maxpool2d_backward", "grad size", grad_out.size(), argmax.size());
  Tensor grad_in(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) grad_in[argmax[o]] += grad_out[o];
  return grad_in;
}

// ---------------------------------------------------------------------------

inline Tensor concat(std::span<const Tensor> parts) {
  std::vector<double> out;
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  const std::size_t n = out.size();
  return Tensor({n}, std::move(out));
}

inline Tensor flatten(const Tensor& input) { return input.reshaped({input.size()}); }

}  // namespace tif::nn
