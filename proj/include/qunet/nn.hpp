#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qunet/rng.hpp"
#include "qunet/tensor.hpp"

namespace qunet::nn {

// ---------------------------------------------------------------------------
// conv2d: cross-correlation, NCHW input, kernel (out, in, kh, kw), unit
// stride, integer zero padding (0 = valid, (k-1)/2 = same for odd kernels).
// ---------------------------------------------------------------------------

inline Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor* bias, int padding) {
  require_shape(x.dims() == 4, "conv2d: input must be (B,C,H,W)");
  require_shape(k.dims() == 4, "conv2d: kernel must be (out,in,kh,kw)");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OC = k.dim(0), KC = k.dim(1), KH = k.dim(2), KW = k.dim(3);
  require_shape(C == KC, "conv2d: input has " + std::to_string(C) +
                             " channels, kernel expects " + std::to_string(KC));
  if (bias) require_shape(bias->size() == OC, "conv2d: bias length mismatch");
  const int OH = H + 2 * padding - KH + 1;
  const int OW = W + 2 * padding - KW + 1;
  require_shape(OH > 0 && OW > 0, "conv2d: kernel larger than padded input");

  Tensor y({B, OC, OH, OW});
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < OC; ++oc)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = bias ? bias->data[static_cast<std::size_t>(oc)] : 0.0;
          for (int ic = 0; ic < C; ++ic)
            for (int ky = 0; ky < KH; ++ky) {
              const int iy = oy + ky - padding;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < KW; ++kx) {
                const int ix = ox + kx - padding;
                if (ix < 0 || ix >= W) continue;
                acc += x.at4(b, ic, iy, ix) *
                       k.data[static_cast<std::size_t>(((oc * C + ic) * KH + ky) * KW + kx)];
              }
            }
          y.at4(b, oc, oy, ox) = acc;
        }
  return y;
}

// Accumulates into gx / gk / gbias (callers zero them when starting a pass).
inline void conv2d_backward(const Tensor& x, const Tensor& k, int padding,
                            const Tensor& gy, Tensor& gx, Tensor& gk, Tensor* gbias) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OC = k.dim(0), KH = k.dim(2), KW = k.dim(3);
  const int OH = gy.dim(2), OW = gy.dim(3);
  require_shape(gy.dim(0) == B && gy.dim(1) == OC, "conv2d_backward: bad upstream shape");

  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < OC; ++oc)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          const double g = gy.at4(b, oc, oy, ox);
          if (gbias) gbias->data[static_cast<std::size_t>(oc)] += g;
          for (int ic = 0; ic < C; ++ic)
            for (int ky = 0; ky < KH; ++ky) {
              const int iy = oy + ky - padding;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < KW; ++kx) {
                const int ix = ox + kx - padding;
                if (ix < 0 || ix >= W) continue;
                const std::size_t ki =
                    static_cast<std::size_t>(((oc * C + ic) * KH + ky) * KW + kx);
                gx.at4(b, ic, iy, ix) += k.data[ki] * g;
                gk.data[ki] += x.at4(b, ic, iy, ix) * g;
              }
            }
        }
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Ties go to the first element in row-major
// window order. argmax stores flat input offsets for the backward pass.
// ---------------------------------------------------------------------------

inline Tensor maxpool2(const Tensor& x, std::vector<int>* argmax) {
  require_shape(x.dims() == 4, "maxpool2: input must be (B,C,H,W)");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require_shape(H % 2 == 0 && W % 2 == 0, "maxpool2: spatial dims must be even, got " +
                                              std::to_string(H) + "x" + std::to_string(W));
  Tensor y({B, C, H / 2, W / 2});
  if (argmax) argmax->assign(static_cast<std::size_t>(y.size()), -1);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < H / 2; ++oy)
        for (int ox = 0; ox < W / 2; ++ox) {
          int best = x.idx4(b, c, 2 * oy, 2 * ox);
          double bv = x.data[static_cast<std::size_t>(best)];
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int i = x.idx4(b, c, 2 * oy + dy, 2 * ox + dx);
              if (x.data[static_cast<std::size_t>(i)] > bv) {
                bv = x.data[static_cast<std::size_t>(i)];
                best = i;
              }
            }
          const int o = y.idx4(b, c, oy, ox);
          y.data[static_cast<std::size_t>(o)] = bv;
          if (argmax) (*argmax)[static_cast<std::size_t>(o)] = best;
        }
  return y;
}

inline Tensor maxpool2_backward(const std::vector<int>& argmax, const Tensor& gy,
                                const std::vector<int>& in_shape) {
  Tensor gx(in_shape);
  require_shape(argmax.size() == gy.data.size(), "maxpool2_backward: argmax/upstream mismatch");
  for (std::size_t i = 0; i < argmax.size(); ++i)
    gx.data[static_cast<std::size_t>(argmax[i])] += gy.data[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Transposed convolution, 2x2 kernel, stride 2: doubles H and W. Kernel
// layout (in, out, 2, 2). The backward input pass is the adjoint stride-2
// convolution.
// ---------------------------------------------------------------------------

inline Tensor transposed_conv2(const Tensor& x, const Tensor& k, const Tensor* bias) {
  require_shape(x.dims() == 4, "transposed_conv2: input must be (B,C,H,W)");
  require_shape(k.dims() == 4 && k.dim(2) == 2 && k.dim(3) == 2,
                "transposed_conv2: kernel must be (in,out,2,2)");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OC = k.dim(1);
  require_shape(C == k.dim(0), "transposed_conv2: channel mismatch");
  if (bias) require_shape(bias->size() == OC, "transposed_conv2: bias length mismatch");

  Tensor y({B, OC, 2 * H, 2 * W});
  if (bias)
    for (int b = 0; b < B; ++b)
      for (int oc = 0; oc < OC; ++oc)
        for (int oy = 0; oy < 2 * H; ++oy)
          for (int ox = 0; ox < 2 * W; ++ox)
            y.at4(b, oc, oy, ox) = bias->data[static_cast<std::size_t>(oc)];

  for (int b = 0; b < B; ++b)
    for (int ic = 0; ic < C; ++ic)
      for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
          const double v = x.at4(b, ic, iy, ix);
          for (int oc = 0; oc < OC; ++oc)
            for (int ky = 0; ky < 2; ++ky)
              for (int kx = 0; kx < 2; ++kx)
                y.at4(b, oc, 2 * iy + ky, 2 * ix + kx) +=
                    v * k.data[static_cast<std::size_t>(((ic * OC + oc) * 2 + ky) * 2 + kx)];
        }
  return y;
}

inline void transposed_conv2_backward(const Tensor& x, const Tensor& k, const Tensor& gy,
                                      Tensor& gx, Tensor& gk, Tensor* gbias) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OC = k.dim(1);
  require_shape(gy.dim(2) == 2 * H && gy.dim(3) == 2 * W,
                "transposed_conv2_backward: bad upstream shape");

  if (gbias)
    for (int b = 0; b < B; ++b)
      for (int oc = 0; oc < OC; ++oc)
        for (int oy = 0; oy < 2 * H; ++oy)
          for (int ox = 0; ox < 2 * W; ++ox)
            gbias->data[static_cast<std::size_t>(oc)] += gy.at4(b, oc, oy, ox);

  for (int b = 0; b < B; ++b)
    for (int ic = 0; ic < C; ++ic)
      for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
          double acc = 0.0;
          for (int oc = 0; oc < OC; ++oc)
            for (int ky = 0; ky < 2; ++ky)
              for (int kx = 0; kx < 2; ++kx) {
                const std::size_t ki = static_cast<std::size_t>(((ic * OC + oc) * 2 + ky) * 2 + kx);
                const double g = gy.at4(b, oc, 2 * iy + ky, 2 * ix + kx);
                acc += k.data[ki] * g;
                gk.data[ki] += x.at4(b, ic, iy, ix) * g;
              }
          gx.at4(b, ic, iy, ix) += acc;
        }
}

// ---------------------------------------------------------------------------
// Elementwise activations and channel concatenation.
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

// Subgradient at exactly 0 is defined as 0.
inline Tensor relu_backward(const Tensor& x, const Tensor& gy) {
  Tensor gx = Tensor(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    gx.data[i] = x.data[i] > 0.0 ? gy.data[i] : 0.0;
  return gx;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
  return y;
}

// y is the forward output.
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& gy) {
  Tensor gx = Tensor(y.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i)
    gx.data[i] = gy.data[i] * y.data[i] * (1.0 - y.data[i]);
  return gx;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_shape(a.dims() == 4 && b.dims() == 4, "concat_channels: inputs must be 4-d");
  require_shape(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                "concat_channels: batch/spatial dims differ");
  const int B = a.dim(0), CA = a.dim(1), CB = b.dim(1), H = a.dim(2), W = a.dim(3);
  Tensor y({B, CA + CB, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int bi = 0; bi < B; ++bi) {
    std::copy(a.data.begin() + bi * CA * plane, a.data.begin() + (bi + 1) * CA * plane,
              y.data.begin() + static_cast<std::size_t>(bi) * (CA + CB) * plane);
    std::copy(b.data.begin() + bi * CB * plane, b.data.begin() + (bi + 1) * CB * plane,
              y.data.begin() + static_cast<std::size_t>(bi) * (CA + CB) * plane + CA * plane);
  }
  return y;
}

inline void split_channels(const Tensor& g, int ca, Tensor& ga, Tensor& gb) {
  const int B = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
  const int cb = C - ca;
  ga = Tensor({B, ca, H, W});
  gb = Tensor({B, cb, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int bi = 0; bi < B; ++bi) {
    std::copy(g.data.begin() + static_cast<std::size_t>(bi) * C * plane,
              g.data.begin() + static_cast<std::size_t>(bi) * C * plane + ca * plane,
              ga.data.begin() + static_cast<std::size_t>(bi) * ca * plane);
    std::copy(g.data.begin() + static_cast<std::size_t>(bi) * C * plane + ca * plane,
              g.data.begin() + static_cast<std::size_t>(bi + 1) * C * plane,
              gb.data.begin() + static_cast<std::size_t>(bi) * cb * plane);
  }
}

// ---------------------------------------------------------------------------
// Binary cross entropy, mean over all elements. Predictions are clamped to
// [1e-7, 1-1e-7]; the gradient is zero where the clamp is active.
// ---------------------------------------------------------------------------

inline constexpr double kBceEps = 1e-7;

inline double bce_loss(const Tensor& pred, const Tensor& target, Tensor* grad_pred) {
  require_shape(pred.same_shape(target), "bce_loss: shape mismatch");
  if (grad_pred) *grad_pred = Tensor(pred.shape);
  const double n = static_cast<double>(pred.data.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double raw = pred.data[i];
    const double p = std::min(std::max(raw, kBceEps), 1.0 - kBceEps);
    const double t = target.data[i];
    loss -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    if (grad_pred) {
      const bool clamped = raw < kBceEps || raw > 1.0 - kBceEps;
      grad_pred->data[i] = clamped ? 0.0 : (p - t) / (p * (1.0 - p) * n);
    }
  }
  return loss / n;
}

// ---------------------------------------------------------------------------
// Adam with bias correction.
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n, double learning_rate = 1e-3)
      : first_moment(n, 0.0), second_moment(n, 0.0), lr(learning_rate) {}
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.first_moment.size())
    throw std::invalid_argument("adam_step: length mismatch");
  st.step_count += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.first_moment[i] = st.beta1 * st.first_moment[i] + (1.0 - st.beta1) * g;
    st.second_moment[i] = st.beta2 * st.second_moment[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.first_moment[i] / bc1;
    const double vhat = st.second_moment[i] / bc2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
  }
}

// Glorot-uniform fill: +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
}

}  // namespace qunet::nn
