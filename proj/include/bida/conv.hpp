// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "bida/field.hpp"
#include "bida/parallel.hpp"
#include "bida/tensor.hpp"

namespace bida {

namespace detail {
// Eight-wide SIMD vector (GCC/Clang vector extension).
template <typename Real>
struct Lane8;
template <>
struct Lane8<float> {
  typedef float type __attribute__((vector_size(32)));
};
template <>
struct Lane8<double> {
  typedef double type __attribute__((vector_size(64)));
};
}  // namespace detail

/// 2-D convolution over HWC fields with zero padding of k/2 on each side.
/// Weights use the [out, in, kh, kw] layout; kernels must have odd extents.
template <typename Real>
class Conv2d {
 public:
  Conv2d(const Tensor<Real>& weight, const Tensor<Real>* bias, int stride = 1)
      : stride_(stride) {
    if (weight.shape.size() != 4) throw WeightError("conv2d: weight must be 4-D [out, in, kh, kw]");
    out_ = weight.shape[0];
    in_ = weight.shape[1];
    kh_ = weight.shape[2];
    kw_ = weight.shape[3];
    if (kh_ % 2 == 0 || kw_ % 2 == 0) throw WeightError("conv2d: kernel extents must be odd");
    if (stride_ < 1) throw ValueError("conv2d: stride must be >= 1");
    if (bias && (bias->shape != Shape{out_})) throw WeightError("conv2d: bias shape mismatch");
    // [ky][kx][in][out] for the forward pass, [ky][kx][out][in] for grad-input.
    fwd_.resize(weight.numel());
    bwd_.resize(weight.numel());
    for (int o = 0; o < out_; ++o)
      for (int c = 0; c < in_; ++c)
        for (int ky = 0; ky < kh_; ++ky)
          for (int kx = 0; kx < kw_; ++kx) {
            const Real w = weight.values[std::size_t(((o * in_ + c) * kh_ + ky) * kw_ + kx)];
            fwd_[std::size_t(((ky * kw_ + kx) * in_ + c) * out_ + o)] = w;
            bwd_[std::size_t(((ky * kw_ + kx) * out_ + o) * in_ + c)] = w;
          }
    bias_.assign(std::size_t(out_), Real(0));
    if (bias) bias_ = bias->values;
  }

  int out_channels() const noexcept { return out_; }
  int in_channels() const noexcept { return in_; }

  int out_extent(int n, int k) const { return (n + 2 * (k / 2) - k) / stride_ + 1; }

  ChannelField<Real> forward(const ChannelField<Real>& in) const {
    ChannelField<Real> out(out_extent(in.height(), kh_), out_extent(in.width(), kw_), out_, Real(0));
    accumulate(in, out, true);
    return out;
  }

  /// out += conv(in) (+ bias when with_bias).
  void accumulate(const ChannelField<Real>& in, ChannelField<Real>& out, bool with_bias) const {
    check_input(in);
    const int oh = out_extent(in.height(), kh_);
    const int ow = out_extent(in.width(), kw_);
    if (out.height() != oh || out.width() != ow || out.channels() != out_) {
      throw ShapeError("conv2d: output buffer has the wrong shape");
    }
    const auto pad = padded(in.values(), in.height(), in.width(), in_, kh_ / 2, kw_ / 2);
    const std::size_t pw = std::size_t(in.width() + 2 * (kw_ / 2));
    const std::size_t I = std::size_t(in_);
    const std::size_t O = std::size_t(out_);
    const int taps = kh_ * kw_;
    const std::size_t step = std::size_t(stride_) * I;
    parallel_for(oh, [&](int y) {
      std::vector<const Real*> src(std::size_t(taps), nullptr);
      std::vector<const Real*> wts(std::size_t(taps), nullptr);
      std::vector<const Real*> wts_t(std::size_t(taps), nullptr);
      for (int t = 0; t < taps; ++t) {
        wts[std::size_t(t)] = fwd_.data() + std::size_t(t) * I * O;
        wts_t[std::size_t(t)] = bwd_.data() + std::size_t(t) * I * O;
      }
      for (int x0 = 0; x0 < ow; x0 += kTile) {
        const int n = std::min(kTile, ow - x0);
        for (int ky = 0; ky < kh_; ++ky) {
          const Real* row = pad.data() + std::size_t(y * stride_ + ky) * pw * I;
          for (int kx = 0; kx < kw_; ++kx) src[std::size_t(ky * kw_ + kx)] = row + std::size_t(x0 * stride_ + kx) * I;
        }
        tile_product(taps, src.data(), wts.data(), wts_t.data(), in_, step, out_, with_bias ? bias_.data() : nullptr,
                     out.pixel(y, x0).data(), n);
      }
    });
  }

  /// Gradient with respect to the input.
  ChannelField<Real> backward_input(const ChannelField<Real>& grad_out, int in_height,
                                    int in_width) const {
    check_grad(grad_out, in_height, in_width);
    ChannelField<Real> grad(in_height, in_width, in_, Real(0));
    const int py = kh_ / 2;
    const int px = kw_ / 2;
    if (stride_ == 1) {
      // Correlation of the padded upstream gradient with the flipped kernel.
      const auto pad = padded(grad_out.values(), grad_out.height(), grad_out.width(), out_, py, px);
      const std::size_t pw = std::size_t(grad_out.width() + 2 * px);
      const std::size_t I = std::size_t(in_);
      const std::size_t O = std::size_t(out_);
      const int taps = kh_ * kw_;
      parallel_for(in_height, [&](int iy) {
        std::vector<const Real*> src(std::size_t(taps), nullptr);
        std::vector<const Real*> wts(std::size_t(taps), nullptr);
        std::vector<const Real*> wts_t(std::size_t(taps), nullptr);
        for (int t = 0; t < taps; ++t) {
          wts[std::size_t(t)] = bwd_.data() + std::size_t(t) * O * I;
          wts_t[std::size_t(t)] = fwd_.data() + std::size_t(t) * O * I;
        }
        for (int x0 = 0; x0 < in_width; x0 += kTile) {
          const int n = std::min(kTile, in_width - x0);
          for (int ky = 0; ky < kh_; ++ky) {
            const Real* row = pad.data() + std::size_t(iy - ky + 2 * py) * pw * O;
            for (int kx = 0; kx < kw_; ++kx) src[std::size_t(ky * kw_ + kx)] = row + std::size_t(x0 - kx + 2 * px) * O;
          }
          tile_product(taps, src.data(), wts.data(), wts_t.data(), out_, O, in_, nullptr, grad.pixel(iy, x0).data(), n);
        }
      });
      return grad;
    }
    parallel_for(in_height, [&](int iy) {
      for (int ix = 0; ix < in_width; ++ix) {
        Real* dst = grad.pixel(iy, ix).data();
        for (int ky = 0; ky < kh_; ++ky) {
          const int ny = iy - ky + py;
          if (ny < 0 || ny % stride_ != 0) continue;
          const int y = ny / stride_;
          if (y >= grad_out.height()) continue;
          for (int kx = 0; kx < kw_; ++kx) {
            const int nx = ix - kx + px;
            if (nx < 0 || nx % stride_ != 0) continue;
            const int x = nx / stride_;
            if (x >= grad_out.width()) continue;
            const Real* g = grad_out.pixel(y, x).data();
            const Real* wk = bwd_.data() + std::size_t((ky * kw_ + kx) * out_) * std::size_t(in_);
            for (int o = 0; o < out_; ++o) {
              const Real go = g[o];
              const Real* wrow = wk + std::size_t(o) * std::size_t(in_);
              for (int c = 0; c < in_; ++c) dst[c] += go * wrow[c];
            }
          }
        }
      }
    });
    return grad;
  }

  /// Accumulates weight/bias gradients ([out, in, kh, kw] and [out]).
  void backward_params(const ChannelField<Real>& in, const ChannelField<Real>& grad_out,
                       Tensor<Real>& grad_weight, Tensor<Real>* grad_bias) const {
    check_grad(grad_out, in.height(), in.width());
    const auto pad = padded(in.values(), in.height(), in.width(), in_, kh_ / 2, kw_ / 2);
    const int pw = in.width() + 2 * (kw_ / 2);
    const std::size_t O = std::size_t(out_);
    const std::size_t wn = std::size_t(kh_ * kw_ * in_) * O;
    // Fixed row blocks reduced in order: the result does not depend on the
    // worker count.
    constexpr int kRows = 8;
    const int blocks = (grad_out.height() + kRows - 1) / kRows;
    std::vector<std::vector<Real>> partial(static_cast<std::size_t>(blocks));
    std::vector<std::vector<Real>> partial_bias(static_cast<std::size_t>(blocks));
    const int ow = grad_out.width();
    const std::size_t step = std::size_t(stride_) * std::size_t(in_);
    parallel_for(blocks, [&](int b) {
      auto& gw = partial[std::size_t(b)];
      auto& gb = partial_bias[std::size_t(b)];
      gw.assign(wn, Real(0));
      gb.assign(O, Real(0));
      const int y_end = std::min(grad_out.height(), (b + 1) * kRows);
      for (int y = b * kRows; y < y_end; ++y) {
        const Real* g = grad_out.pixel(y, 0).data();
        for (int x = 0; x < ow; ++x)
          for (std::size_t o = 0; o < O; ++o) gb[o] += g[std::size_t(x) * O + o];
        for (int ky = 0; ky < kh_; ++ky) {
          const Real* row = pad.data() + std::size_t(y * stride_ + ky) * std::size_t(pw) * std::size_t(in_);
          for (int kx = 0; kx < kw_; ++kx) {
            weight_row(row + std::size_t(kx) * std::size_t(in_), step, g, ow, in_, out_,
                       gw.data() + std::size_t((ky * kw_ + kx) * in_) * O);
          }
        }
      }
    });
    for (int b = 0; b < blocks; ++b) {
      const auto& gw = partial[std::size_t(b)];
      for (int o = 0; o < out_; ++o)
        for (int c = 0; c < in_; ++c)
          for (int ky = 0; ky < kh_; ++ky)
            for (int kx = 0; kx < kw_; ++kx) {
              grad_weight.values[std::size_t(((o * in_ + c) * kh_ + ky) * kw_ + kx)] +=
                  gw[std::size_t(((ky * kw_ + kx) * in_ + c) * out_ + o)];
            }
      if (grad_bias) {
        for (int o = 0; o < out_; ++o)
          grad_bias->values[std::size_t(o)] += partial_bias[std::size_t(b)][std::size_t(o)];
      }
    }
  }

 private:
  static constexpr int kTile = 8;
  static constexpr int kBlock = 8;

  using Lane = typename detail::Lane8<Real>::type;

  static Lane load_lane(const Real* p) {
    Lane v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }

  // kBlock output channels starting at o0, N pixels.
  template <int N>
  static void tile_lane(int taps, const Real* const* src, const Real* const* w, int C, std::size_t step, int O,
                        int o0, const Real* init, Real* dst) {
    const Lane start = init ? load_lane(init + o0) : Lane{};
    Lane acc[N];
    for (int j = 0; j < N; ++j) acc[j] = start;
    for (int t = 0; t < taps; ++t) {
      const Real* s = src[t];
      const Real* wr = w[t] + o0;
      for (int c = 0; c < C; ++c, wr += O) {
        const Lane wv = load_lane(wr);
        for (int j = 0; j < N; ++j) acc[j] += s[std::size_t(j) * step + std::size_t(c)] * wv;
      }
    }
    for (int j = 0; j < N; ++j) {
      Real* d = dst + std::size_t(j) * std::size_t(O) + std::size_t(o0);
      std::memcpy(d, &(acc[j] += load_lane(d)), sizeof(Lane));
    }
  }

  // One output channel, N pixels.
  template <int N>
  static void tile_scalar(int taps, const Real* const* src, const Real* const* w, int C, std::size_t step, int O,
                          int o, const Real* init, Real* dst) {
    Real acc[N];
    for (int j = 0; j < N; ++j) acc[j] = init ? init[o] : Real(0);
    for (int t = 0; t < taps; ++t) {
      const Real* s = src[t];
      const Real* wr = w[t] + o;
      for (int c = 0; c < C; ++c, wr += O) {
        const Real wv = *wr;
        for (int j = 0; j < N; ++j) acc[j] += s[std::size_t(j) * step + std::size_t(c)] * wv;
      }
    }
    for (int j = 0; j < N; ++j) dst[std::size_t(j) * std::size_t(O) + std::size_t(o)] += acc[j];
  }

  // One output channel o, N pixels, vectorised along the reduction axis.
  // wt holds the weights transposed to [tap][O][C].
  template <int N>
  static void tile_reduce(int taps, const Real* const* src, const Real* const* wt, int C, std::size_t step, int O,
                          int o, const Real* init, Real* dst) {
    Lane acc[N];
    Real tail[N];
    for (int j = 0; j < N; ++j) {
      acc[j] = Lane{};
      tail[j] = Real(0);
    }
    const int cv = C / kBlock * kBlock;
    for (int t = 0; t < taps; ++t) {
      const Real* s = src[t];
      const Real* wr = wt[t] + std::size_t(o) * std::size_t(C);
      for (int c0 = 0; c0 < cv; c0 += kBlock) {
        const Lane wv = load_lane(wr + c0);
        for (int j = 0; j < N; ++j) acc[j] += load_lane(s + std::size_t(j) * step + std::size_t(c0)) * wv;
      }
      for (int c = cv; c < C; ++c)
        for (int j = 0; j < N; ++j) tail[j] += s[std::size_t(j) * step + std::size_t(c)] * wr[c];
    }
    for (int j = 0; j < N; ++j) {
      Real v = init ? init[o] : Real(0);
      for (int l = 0; l < kBlock; ++l) v += acc[j][l];
      dst[std::size_t(j) * std::size_t(O) + std::size_t(o)] += v + tail[j];
    }
  }

  template <int N>
  static void tile_columns(int taps, const Real* const* src, const Real* const* w, const Real* const* wt, int C,
                           std::size_t step, int O, const Real* init, Real* dst) {
    int o0 = 0;
    for (; o0 + kBlock <= O; o0 += kBlock) tile_lane<N>(taps, src, w, C, step, O, o0, init, dst);
    for (; o0 < O; ++o0) {
      if (C >= kBlock) {
        tile_reduce<N>(taps, src, wt, C, step, O, o0, init, dst);
      } else {
        tile_scalar<N>(taps, src, w, C, step, O, o0, init, dst);
      }
    }
  }

  // dst[j][o] += init[o] + sum over taps t and channels c of
  // src[t][j * step + c] * w[t][c * O + o], for n <= kTile consecutive pixels.
  static void tile_product(int taps, const Real* const* src, const Real* const* w, const Real* const* wt, int C,
                           std::size_t step, int O, const Real* init, Real* dst, int n) {
    if (n == kTile) return tile_columns<kTile>(taps, src, w, wt, C, step, O, init, dst);
    std::vector<const Real*> shifted(src, src + taps);
    for (int j = 0; j < n; ++j) {
      tile_columns<1>(taps, shifted.data(), w, wt, C, step, O, init, dst + std::size_t(j) * std::size_t(O));
      for (auto& p : shifted) p += step;
    }
  }

  // gw[c][o] += sum over x of s[x * step + c] * g[x * O + o] for one row of
  // W pixels.
  static void weight_row(const Real* s, std::size_t step, const Real* g, int W, int C, int O, Real* gw) {
    constexpr int kGroup = 8;
    const std::size_t so = std::size_t(O);
    int o0 = 0;
    for (; o0 + kBlock <= O; o0 += kBlock) {
      int c = 0;
      for (; c + kGroup <= C; c += kGroup) {
        Lane acc[kGroup] = {};
        for (int x = 0; x < W; ++x) {
          const Lane gv = load_lane(g + std::size_t(x) * so + std::size_t(o0));
          const Real* sx = s + std::size_t(x) * step + std::size_t(c);
          for (int k = 0; k < kGroup; ++k) acc[k] += sx[k] * gv;
        }
        for (int k = 0; k < kGroup; ++k) {
          Real* d = gw + std::size_t(c + k) * so + std::size_t(o0);
          std::memcpy(d, &(acc[k] += load_lane(d)), sizeof(Lane));
        }
      }
      for (; c < C; ++c) {
        Lane acc = {};
        for (int x = 0; x < W; ++x) acc += s[std::size_t(x) * step + std::size_t(c)] * load_lane(g + std::size_t(x) * so + std::size_t(o0));
        Real* d = gw + std::size_t(c) * so + std::size_t(o0);
        std::memcpy(d, &(acc += load_lane(d)), sizeof(Lane));
      }
    }
    for (; o0 < O; ++o0) {
      int c = 0;
      for (; c + kBlock <= C; c += kBlock) {
        Lane acc = {};
        for (int x = 0; x < W; ++x) acc += load_lane(s + std::size_t(x) * step + std::size_t(c)) * g[std::size_t(x) * so + std::size_t(o0)];
        for (int l = 0; l < kBlock; ++l) gw[std::size_t(c + l) * so + std::size_t(o0)] += acc[l];
      }
      for (; c < C; ++c) {
        Real acc = 0;
        for (int x = 0; x < W; ++x) acc += s[std::size_t(x) * step + std::size_t(c)] * g[std::size_t(x) * so + std::size_t(o0)];
        gw[std::size_t(c) * so + std::size_t(o0)] += acc;
      }
    }
  }

  // Zero-padded copy with py rows / px columns on each side.
  static std::vector<Real> padded(std::span<const Real> src, int h, int w, int c, int py, int px) {
    const int ph = h + 2 * py;
    const int pw = w + 2 * px;
    std::vector<Real> out(std::size_t(ph) * std::size_t(pw) * std::size_t(c), Real(0));
    for (int y = 0; y < h; ++y) {
      std::copy(src.begin() + std::ptrdiff_t(std::size_t(y) * std::size_t(w) * std::size_t(c)),
                src.begin() + std::ptrdiff_t(std::size_t(y + 1) * std::size_t(w) * std::size_t(c)),
                out.begin() + std::ptrdiff_t((std::size_t(y + py) * std::size_t(pw) + std::size_t(px)) * std::size_t(c)));
    }
    return out;
  }

  void check_input(const ChannelField<Real>& in) const {
    if (in.channels() != in_) {
      throw ShapeError("conv2d: input has " + std::to_string(in.channels()) + " channels, weight expects " +
                       std::to_string(in_));
    }
  }

  void check_grad(const ChannelField<Real>& grad_out, int in_height, int in_width) const {
    if (grad_out.channels() != out_ || grad_out.height() != out_extent(in_height, kh_) ||
        grad_out.width() != out_extent(in_width, kw_)) {
      throw ShapeError("conv2d: upstream gradient has the wrong shape");
    }
  }

  int out_ = 0, in_ = 0, kh_ = 1, kw_ = 1, stride_ = 1;
  std::vector<Real> fwd_;
  std::vector<Real> bwd_;
  std::vector<Real> bias_;
};

enum class Activation { identity, relu, tanh, sigmoid };

template <typename Real, int K>
void activate(BasicField<Real, K>& f, Activation act) {
  switch (act) {
    case Activation::identity: return;
    case Activation::relu:
      for (auto& v : f.values()) v = v > Real(0) ? v : Real(0);
      return;
    case Activation::tanh:
      for (auto& v : f.values()) v = std::tanh(v);
      return;
    case Activation::sigmoid:
      for (auto& v : f.values()) v = Real(1) / (Real(1) + std::exp(-v));
      return;
  }
}

/// grad *= act'(pre-activation), expressed through the activation output.
template <typename Real, int K>
void activate_backward(BasicField<Real, K>& grad, const BasicField<Real, K>& output, Activation act) {
  auto g = grad.values();
  auto y = output.values();
  switch (act) {
    case Activation::identity: return;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] > Real(0) ? g[i] : Real(0);
      return;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= Real(1) - y[i] * y[i];
      return;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (Real(1) - y[i]);
      return;
  }
}

/// conv + activation through a weight bank entry pair "<name>.weight"/"<name>.bias".
template <typename Real>
ChannelField<Real> conv_layer(const WeightBank<Real>& bank, const std::string& name,
                              const Shape& weight_shape, const ChannelField<Real>& in,
                              Activation act, int stride = 1) {
  const auto& w = bank.require(name + ".weight", weight_shape);
  const auto& b = bank.require(name + ".bias", {weight_shape[0]});
  auto out = Conv2d<Real>(w, &b, stride).forward(in);
  activate(out, act);
  return out;
}

/// 3-D convolution over a frame sequence, kernel [out, in, kt, kh, kw].
/// Time is padded by edge replication, space by zeros.
template <typename Real>
ChannelSequence<Real> conv3d_sequence(const ChannelSequence<Real>& in, const Tensor<Real>& weight,
                                      const Tensor<Real>* bias) {
  if (weight.shape.size() != 5) throw WeightError("conv3d: weight must be 5-D [out, in, kt, kh, kw]");
  if (in.empty()) throw ShapeError("conv3d: empty sequence");
  const int out_c = weight.shape[0];
  const int in_c = weight.shape[1];
  const int kt = weight.shape[2];
  const int kh = weight.shape[3];
  const int kw = weight.shape[4];
  if (kt % 2 == 0) throw WeightError("conv3d: temporal kernel extent must be odd");

  std::vector<Conv2d<Real>> taps;
  taps.reserve(std::size_t(kt));
  for (int dt = 0; dt < kt; ++dt) {
    Tensor<Real> slice({out_c, in_c, kh, kw});
    for (int o = 0; o < out_c; ++o)
      for (int c = 0; c < in_c; ++c)
        for (int k = 0; k < kh * kw; ++k) {
          slice.values[std::size_t((o * in_c + c) * kh * kw + k)] =
              weight.values[std::size_t(((o * in_c + c) * kt + dt) * kh * kw + k)];
        }
    taps.emplace_back(slice, dt == 0 ? bias : nullptr);
  }

  const int T = int(in.size());
  ChannelSequence<Real> out;
  out.reserve(in.size());
  for (int t = 0; t < T; ++t) {
    ChannelField<Real> frame(in[0].height(), in[0].width(), out_c, Real(0));
    for (int dt = 0; dt < kt; ++dt) {
      const int src = std::clamp(t + dt - kt / 2, 0, T - 1);
      taps[std::size_t(dt)].accumulate(in[std::size_t(src)], frame, dt == 0);
    }
    out.push_back(std::move(frame));
  }
  return out;
}

}  // namespace bida
