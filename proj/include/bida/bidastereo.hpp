// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bida/conv.hpp"
#include "bida/correlation.hpp"
#include "bida/field.hpp"
#include "bida/random.hpp"
#include "bida/tensor.hpp"
#include "bida/warp.hpp"

namespace bida {

/// One 3-D updater layer: kernel extent along (time, height, width).
struct UpdaterKernel {
  int t = 1, h = 1, w = 1;
  bool operator==(const UpdaterKernel&) const = default;
};

struct BiDAStereoConfig {
  int feature_channels = 16;  ///< C: feature pyramid width
  int encoder_channels = 16;  ///< Corr-Enc / Disp-Enc output width
  int motion_channels = 16;   ///< C0: motion hidden state width
  int hidden_channels = 32;   ///< GRU hidden state width
  int updater_channels = 32;
  int iterations = 20;
  CorrelationNorm norm = CorrelationNorm::mean;
  /// Temporal mixing, regular width kernel, wide epipolar kernel; a 1x1x1
  /// projection head follows.
  std::vector<UpdaterKernel> updater{{3, 1, 1}, {1, 1, 5}, {1, 1, 15}};
  std::uint64_t motion_seed = 0;
  double motion_init_sigma = 1.0;

  static constexpr std::array<int, 3> kStageDivisors{16, 8, 4};

  int cost_channels() const { return 3 * 9; }
  int motion_feature_channels() const { return hidden_channels; }

  /// (tensor base name, weight shape) for every layer.
  std::vector<std::pair<std::string, Shape>> layers() const {
    const int C = feature_channels, E = encoder_channels, C0 = motion_channels;
    const int Ch = hidden_channels, Cm = motion_feature_channels(), U = updater_channels;
    std::vector<std::pair<std::string, Shape>> out = {
        {"fe.0", {C, 3, 3, 3}},
        {"fe.1", {C, C, 3, 3}},
        {"fe.2", {C, C, 3, 3}},
        {"corr_enc", {E, cost_channels(), 3, 3}},
        {"disp_enc", {E, 1, 3, 3}},
        {"prop_enc", {C0, 3 * C0, 3, 3}},
        {"mot_enc.feat", {Cm, 2 * E + C0, 3, 3}},
        {"mot_enc.gru_z", {Ch, Ch + Cm, 3, 3}},
        {"mot_enc.gru_r", {Ch, Ch + Cm, 3, 3}},
        {"mot_enc.gru_q", {Ch, Ch + Cm, 3, 3}},
        {"mot_enc.motion", {C0, Cm + Ch, 3, 3}},
    };
    int in = Ch + Cm;
    for (std::size_t i = 0; i < updater.size(); ++i) {
      const auto& k = updater[i];
      out.push_back({"updater." + std::to_string(i), {U, in, k.t, k.h, k.w}});
      in = U;
    }
    out.push_back({"updater.head", {1, in, 1, 1, 1}});
    return out;
  }

  void validate() const {
    if (feature_channels < 1 || encoder_channels < 1 || motion_channels < 1 || hidden_channels < 1 ||
        updater_channels < 1) {
      throw ValueError("bidastereo: channel widths must be >= 1");
    }
    if (iterations < 0) throw ValueError("bidastereo: iterations must be >= 0");
    for (const auto& k : updater) {
      if (k.t < 1 || k.h < 1 || k.w < 1 || k.t % 2 == 0 || k.h % 2 == 0 || k.w % 2 == 0) {
        throw ValueError("bidastereo: updater kernels must have odd positive extents");
      }
    }
  }
};

/// Recovers widths and updater kernels from a weight bank's shapes.
template <typename Real>
BiDAStereoConfig bidastereo_config_from(const WeightBank<Real>& bank) {
  BiDAStereoConfig cfg;
  cfg.feature_channels = bank.get("fe.0.weight").shape.at(0);
  cfg.encoder_channels = bank.get("corr_enc.weight").shape.at(0);
  cfg.motion_channels = bank.get("prop_enc.weight").shape.at(0);
  cfg.hidden_channels = bank.get("mot_enc.gru_z.weight").shape.at(0);
  cfg.updater.clear();
  for (int i = 0; bank.contains("updater." + std::to_string(i) + ".weight"); ++i) {
    const auto& s = bank.get("updater." + std::to_string(i) + ".weight").shape;
    if (s.size() != 5) throw WeightError("bidastereo: updater weights must be 5-D");
    if (i == 0) cfg.updater_channels = s[0];
    cfg.updater.push_back({s[2], s[3], s[4]});
  }
  if (cfg.updater.empty()) throw WeightError("missing weight tensor 'updater.0.weight'");
  for (const auto& [name, shape] : cfg.layers()) bank.require(name + ".weight", shape);
  return cfg;
}

template <typename Real>
WeightBank<Real> zero_bidastereo_weights(const BiDAStereoConfig& cfg) {
  WeightBank<Real> bank;
  for (const auto& [name, shape] : cfg.layers()) {
    bank.set(name + ".weight", Tensor<Real>(shape));
    bank.set(name + ".bias", Tensor<Real>({shape[0]}));
  }
  return bank;
}

template <typename Real>
WeightBank<Real> init_bidastereo_weights(const BiDAStereoConfig& cfg, std::uint64_t seed, double gain = 1.0) {
  Rng rng(seed);
  WeightBank<Real> bank;
  for (const auto& [name, shape] : cfg.layers()) {
    bank.set(name + ".weight", random_conv_weight<Real>(shape, rng, gain));
    bank.set(name + ".bias", Tensor<Real>({shape[0]}));
  }
  return bank;
}

/// Left/right features per frame at one scale.
template <typename Real>
struct FeatureLevel {
  int divisor = 1;
  ChannelSequence<Real> left;
  ChannelSequence<Real> right;
};

/// Levels ordered 1/16, 1/8, 1/4.
template <typename Real>
struct FeaturePyramid {
  std::array<FeatureLevel<Real>, 3> levels;
};

namespace detail {
template <typename Real>
std::array<ChannelField<Real>, 3> encode_frame(const ChannelField<Real>& image, const WeightBank<Real>& w,
                                               const BiDAStereoConfig& cfg) {
  const auto layers = cfg.layers();
  auto quarter = conv_layer(w, "fe.0", layers[0].second, image, Activation::relu, 4);
  auto eighth = conv_layer(w, "fe.1", layers[1].second, quarter, Activation::relu, 2);
  auto sixteenth = conv_layer(w, "fe.2", layers[2].second, eighth, Activation::relu, 2);
  return {std::move(sixteenth), std::move(eighth), std::move(quarter)};
}
}  // namespace detail

/// Shared-weight strided encoder: a stride-4 stem to 1/4 scale followed by
/// two stride-2 stages to 1/8 and 1/16.
template <typename Real>
FeaturePyramid<Real> extract_features(const ChannelSequence<Real>& left, const ChannelSequence<Real>& right,
                                      const WeightBank<Real>& weights, const BiDAStereoConfig& cfg = {}) {
  if (left.empty() || left.size() != right.size()) throw ShapeError("extract_features: need matching non-empty views");
  const int H = left[0].height();
  const int W = left[0].width();
  if (H % 16 != 0 || W % 16 != 0) {
    throw ShapeError("extract_features: image size must be divisible by 16, got " + std::to_string(H) + "x" +
                     std::to_string(W));
  }
  for (std::size_t t = 0; t < left.size(); ++t) {
    for (const auto* img : {&left[t], &right[t]}) {
      if (img->height() != H || img->width() != W || img->channels() != 3) {
        throw ShapeError("extract_features: every frame must be " + std::to_string(H) + "x" + std::to_string(W) +
                         "x3");
      }
    }
  }
  FeaturePyramid<Real> p;
  for (std::size_t s = 0; s < 3; ++s) p.levels[s].divisor = BiDAStereoConfig::kStageDivisors[s];
  for (std::size_t t = 0; t < left.size(); ++t) {
    auto l = detail::encode_frame(left[t], weights, cfg);
    auto r = detail::encode_frame(right[t], weights, cfg);
    for (std::size_t s = 0; s < 3; ++s) {
      p.levels[s].left.push_back(std::move(l[s]));
      p.levels[s].right.push_back(std::move(r[s]));
    }
  }
  return p;
}

/// Recurrent state of the update loop at one scale.
template <typename Real>
struct UpdateState {
  ScalarSequence<Real> disparity;
  ChannelSequence<Real> hidden;  ///< GRU state h per frame
  ChannelSequence<Real> motion;  ///< motion hidden state M per frame
  ScalarSequence<Real> last_residual;
};

/// Neighbouring motion states aligned onto each frame (edges replicate).
template <typename Real>
std::pair<ChannelSequence<Real>, ChannelSequence<Real>> align_motion_states(const ChannelSequence<Real>& motion,
                                                                            const ClipFlows<Real>& flows) {
  ChannelSequence<Real> prev, next;
  for (std::size_t t = 0; t < motion.size(); ++t) {
    prev.push_back(aligned_prev(motion, flows, t));
    next.push_back(aligned_next(motion, flows, t));
  }
  return {std::move(prev), std::move(next)};
}

/// 3-D conv stack over concat(h, F_mot) producing one residual channel per
/// frame.  Time is padded by edge replication.
template <typename Real>
ScalarSequence<Real> super_kernel_update(const ChannelSequence<Real>& hidden, const ChannelSequence<Real>& motion_features,
                                         const WeightBank<Real>& weights, const BiDAStereoConfig& cfg = {}) {
  if (hidden.empty() || hidden.size() != motion_features.size()) {
    throw ShapeError("super_kernel_update: need matching non-empty sequences");
  }
  const auto layers = cfg.layers();
  ChannelSequence<Real> x;
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    x.push_back(concat_channels<Real, 0>({&hidden[t], &motion_features[t]}));
  }
  const std::size_t first = layers.size() - cfg.updater.size() - 1;
  for (std::size_t i = first; i < layers.size(); ++i) {
    const auto& [name, shape] = layers[i];
    const auto& w = weights.require(name + ".weight", shape);
    const auto& b = weights.require(name + ".bias", {shape[0]});
    x = conv3d_sequence(x, w, &b);
    if (i + 1 < layers.size()) {
      for (auto& f : x) activate(f, Activation::relu);
    }
  }
  ScalarSequence<Real> out;
  for (auto& f : x) out.push_back(field_as<ScalarField<Real>>(f));
  return out;
}

/// One update iteration over every frame of the clip.
template <typename Real>
UpdateState<Real> mru_step(const UpdateState<Real>& state, const ChannelSequence<Real>& cost,
                           const ClipFlows<Real>& flows, const WeightBank<Real>& weights,
                           const BiDAStereoConfig& cfg = {}) {
  const std::size_t T = state.disparity.size();
  if (T == 0 || cost.size() != T || state.hidden.size() != T || state.motion.size() != T) {
    throw ShapeError("mru_step: state/cost length mismatch");
  }
  const int h = state.disparity[0].height();
  const int w = state.disparity[0].width();
  flows.validate(T, h, w);
  const auto layers = cfg.layers();
  auto shape_of = [&](const std::string& n) {
    for (const auto& [name, s] : layers)
      if (name == n) return s;
    throw WeightError("unknown layer " + n);
  };

  const auto [m_prev, m_next] = align_motion_states(state.motion, flows);
  UpdateState<Real> next;
  ChannelSequence<Real> f_mot_seq;
  for (std::size_t t = 0; t < T; ++t) {
    const auto stacked = concat_channels<Real, 0>({&m_prev[t], &state.motion[t], &m_next[t]});
    const auto f_prop = conv_layer(weights, "prop_enc", shape_of("prop_enc"), stacked, Activation::relu);
    const auto f_corr = conv_layer(weights, "corr_enc", shape_of("corr_enc"), cost[t], Activation::relu);
    const auto f_disp =
        conv_layer(weights, "disp_enc", shape_of("disp_enc"), as_channels(state.disparity[t]), Activation::relu);

    const auto enc = concat_channels<Real, 0>({&f_corr, &f_disp, &f_prop});
    auto f_mot = conv_layer(weights, "mot_enc.feat", shape_of("mot_enc.feat"), enc, Activation::relu);

    const auto& h_old = state.hidden[t];
    const auto hx = concat_channels<Real, 0>({&h_old, &f_mot});
    const auto z = conv_layer(weights, "mot_enc.gru_z", shape_of("mot_enc.gru_z"), hx, Activation::sigmoid);
    const auto r = conv_layer(weights, "mot_enc.gru_r", shape_of("mot_enc.gru_r"), hx, Activation::sigmoid);
    ChannelField<Real> rh = h_old;
    for (std::size_t i = 0; i < rh.size(); ++i) rh.values()[i] *= r.values()[i];
    const auto rhx = concat_channels<Real, 0>({&rh, &f_mot});
    const auto q = conv_layer(weights, "mot_enc.gru_q", shape_of("mot_enc.gru_q"), rhx, Activation::tanh);
    ChannelField<Real> h_new = h_old;
    for (std::size_t i = 0; i < h_new.size(); ++i) {
      const Real zi = z.values()[i];
      h_new.values()[i] = (Real(1) - zi) * h_old.values()[i] + zi * q.values()[i];
    }
    const auto mh = concat_channels<Real, 0>({&f_mot, &h_new});
    next.motion.push_back(conv_layer(weights, "mot_enc.motion", shape_of("mot_enc.motion"), mh, Activation::tanh));
    next.hidden.push_back(std::move(h_new));
    f_mot_seq.push_back(std::move(f_mot));
  }
  next.last_residual = super_kernel_update(next.hidden, f_mot_seq, weights, cfg);
  for (std::size_t t = 0; t < T; ++t) {
    ScalarField<Real> d = state.disparity[t];
    for (std::size_t i = 0; i < d.size(); ++i) d.values()[i] += next.last_residual[t].values()[i];
    next.disparity.push_back(std::move(d));
  }
  return next;
}

enum class StagePhase { begin, end };

struct StageInfo {
  int stage = 0;    ///< 0, 1, 2
  int divisor = 16;  ///< 16, 8, 4
  StagePhase phase = StagePhase::begin;
};

template <typename Real>
using StageHook = std::function<void(const StageInfo&, const UpdateState<Real>&)>;

/// Cascaded three-stage refinement (1/16 -> 1/8 -> 1/4) from a blank
/// disparity map, upsampled x4 to full resolution.
template <typename Real>
ScalarSequence<Real> run_bidastereo(const ChannelSequence<Real>& left, const ChannelSequence<Real>& right,
                                    const ClipFlows<Real>& flows, const WeightBank<Real>& weights,
                                    const BiDAStereoConfig& cfg = {}, const StageHook<Real>& hook = {}) {
  cfg.validate();
  const auto pyramid = extract_features(left, right, weights, cfg);
  const std::size_t T = left.size();
  const int H = left[0].height();
  const int W = left[0].width();
  flows.validate(T, H, W);

  UpdateState<Real> state;
  for (std::size_t s = 0; s < 3; ++s) {
    const int div = BiDAStereoConfig::kStageDivisors[s];
    const int h = H / div;
    const int w = W / div;
    const auto level_flows = flows.resized(h, w);
    if (s == 0) {
      Rng rng(cfg.motion_seed);
      ChannelField<Real> m0(h, w, cfg.motion_channels, Real(0));
      for (auto& v : m0.values()) v = Real(rng.normal(0.0, cfg.motion_init_sigma));
      for (std::size_t t = 0; t < T; ++t) {
        state.disparity.emplace_back(h, w, Real(0));
        state.motion.push_back(m0);
      }
    } else {
      for (std::size_t t = 0; t < T; ++t) {
        state.disparity[t] = resize_disparity(state.disparity[t], h, w);
        state.motion[t] = resize_bilinear(state.motion[t], h, w);
      }
    }
    state.hidden.assign(T, ChannelField<Real>(h, w, cfg.hidden_channels, Real(0)));
    state.last_residual.clear();
    if (hook) hook({int(s), div, StagePhase::begin}, state);

    const auto& level = pyramid.levels[s];
    for (int it = 0; it < cfg.iterations; ++it) {
      const auto cost = clip_cost_volumes(level.left, level.right, level_flows, state.disparity,
                                          standard_ranges(it), cfg.norm);
      state = mru_step(state, cost, level_flows, weights, cfg);
    }
    if (hook) hook({int(s), div, StagePhase::end}, state);
  }

  ScalarSequence<Real> out;
  for (const auto& d : state.disparity) out.push_back(resize_disparity(d, H, W));
  return out;
}

}  // namespace bida
