// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bida/conv.hpp"
#include "bida/field.hpp"
#include "bida/tensor.hpp"
#include "bida/warp.hpp"

namespace bida {

/// Layer widths and switches of the plugin stabilizer.
///
///   FE:     3 -> feature -> feature                 (two 3x3 convs, tanh)
///   Prop:   hidden + feature -> hidden -> hidden    (two 3x3 convs, tanh)
///   Fusion: 2 * hidden -> fusion -> 1               (3x3 conv + tanh, 3x3 linear head)
struct StabilizerConfig {
  int feature_channels = 16;
  int hidden_channels = 16;
  int fusion_channels = 16;
  /// One propagation encoder for both sweeps; false gives separate
  /// "prop_fwd" / "prop_bwd" weights.
  bool tie_propagation = true;
  /// Divide the input stack by the clip's mean |d| and scale the residual back.
  bool normalize_input = false;

  std::string prop_name(bool forward) const {
    if (tie_propagation) return "prop";
    return forward ? "prop_fwd" : "prop_bwd";
  }

  Shape fe0() const { return {feature_channels, 3, 3, 3}; }
  Shape fe1() const { return {feature_channels, feature_channels, 3, 3}; }
  Shape prop0() const { return {hidden_channels, hidden_channels + feature_channels, 3, 3}; }
  Shape prop1() const { return {hidden_channels, hidden_channels, 3, 3}; }
  Shape fusion0() const { return {fusion_channels, 2 * hidden_channels, 3, 3}; }
  Shape fusion1() const { return {1, fusion_channels, 3, 3}; }

  /// (layer name, weight shape) for every conv layer in the configuration.
  std::vector<std::pair<std::string, Shape>> layers() const {
    std::vector<std::pair<std::string, Shape>> out = {{"fe.0", fe0()}, {"fe.1", fe1()}};
    for (bool fwd : {true, false}) {
      if (!fwd && tie_propagation) break;
      out.push_back({prop_name(fwd) + ".0", prop0()});
      out.push_back({prop_name(fwd) + ".1", prop1()});
    }
    out.push_back({"fusion.0", fusion0()});
    out.push_back({"fusion.1", fusion1()});
    return out;
  }
};

template <typename Real>
WeightBank<Real> zero_stabilizer_weights(const StabilizerConfig& cfg) {
  WeightBank<Real> bank;
  for (const auto& [name, shape] : cfg.layers()) {
    bank.set(name + ".weight", Tensor<Real>(shape));
    bank.set(name + ".bias", Tensor<Real>({shape[0]}));
  }
  return bank;
}

/// Random initialisation.  With zero_head the fusion output layer starts at
/// zero, so the untrained stabilizer is the identity map.
template <typename Real>
WeightBank<Real> init_stabilizer_weights(const StabilizerConfig& cfg, std::uint64_t seed,
                                         bool zero_head = true) {
  Rng rng(seed);
  WeightBank<Real> bank;
  for (const auto& [name, shape] : cfg.layers()) {
    const bool head = name == "fusion.1";
    bank.set(name + ".weight",
             head && zero_head ? Tensor<Real>(shape) : random_conv_weight<Real>(shape, rng));
    bank.set(name + ".bias", Tensor<Real>({shape[0]}));
  }
  return bank;
}

/// Recovers layer widths and weight tying from a weight bank's shapes.
template <typename Real>
StabilizerConfig stabilizer_config_from(const WeightBank<Real>& bank) {
  StabilizerConfig cfg;
  cfg.tie_propagation = bank.contains("prop.0.weight");
  const auto& fe0 = bank.get("fe.0.weight").shape;
  const auto& prop1 = bank.get(cfg.prop_name(true) + ".1.weight").shape;
  const auto& fusion0 = bank.get("fusion.0.weight").shape;
  if (fe0.size() != 4 || prop1.size() != 4 || fusion0.size() != 4) throw WeightError("stabilizer: conv weights must be 4-D");
  cfg.feature_channels = fe0[0];
  cfg.hidden_channels = prop1[0];
  cfg.fusion_channels = fusion0[0];
  for (const auto& [name, shape] : cfg.layers()) bank.require(name + ".weight", shape);
  return cfg;
}

/// Forward/backward hidden states per frame.
template <typename Real>
struct PropagationState {
  ChannelSequence<Real> forward;
  ChannelSequence<Real> backward;
};

template <typename Real>
struct StabilizerOutput {
  ScalarSequence<Real> residual;
  ScalarSequence<Real> corrected;
  PropagationState<Real> states;
};

/// Intermediates retained by the forward pass for stabilize_backward.
template <typename Real>
struct StabilizerTape {
  struct Layer2 {
    ChannelField<Real> input;  // input to the first conv
    ChannelField<Real> a0;     // first activation
    ChannelField<Real> a1;     // second activation / output
  };

  ClipFlows<Real> flows;
  Real scale = Real(1);
  int height = 0;
  int width = 0;
  std::vector<Layer2> fe;
  std::vector<Layer2> forward_prop;
  std::vector<Layer2> backward_prop;
  std::vector<Layer2> fusion;

  bool complete() const {
    const std::size_t T = fe.size();
    return T > 0 && forward_prop.size() == T && backward_prop.size() == T && fusion.size() == T;
  }
};

namespace detail {

template <typename Real>
void check_stabilizer_inputs(const ScalarSequence<Real>& d, const ClipFlows<Real>& flows) {
  if (d.empty()) throw ShapeError("stabilize: empty disparity sequence");
  for (const auto& f : d) require_same_extent(f, d[0], "stabilize");
  if (flows.forward.size() + 1 != d.size() || flows.backward.size() + 1 != d.size()) {
    throw ShapeError("stabilize: " + std::to_string(d.size()) + " disparities need " +
                     std::to_string(d.size() - 1) + " flows per direction, got " +
                     std::to_string(flows.forward.size()) + "/" + std::to_string(flows.backward.size()));
  }
  flows.validate(d.size(), d[0].height(), d[0].width());
}

template <typename Real>
struct TwoLayer {
  Conv2d<Real> c0;
  Conv2d<Real> c1;
  Activation act1;

  TwoLayer(const WeightBank<Real>& bank, const std::string& name, const Shape& s0, const Shape& s1,
           Activation second)
      : c0(bank.require(name + ".0.weight", s0), &bank.require(name + ".0.bias", {s0[0]})),
        c1(bank.require(name + ".1.weight", s1), &bank.require(name + ".1.bias", {s1[0]})),
        act1(second) {}

  typename StabilizerTape<Real>::Layer2 run(ChannelField<Real> input) const {
    typename StabilizerTape<Real>::Layer2 rec;
    rec.a0 = c0.forward(input);
    activate(rec.a0, Activation::tanh);
    rec.a1 = c1.forward(rec.a0);
    activate(rec.a1, act1);
    rec.input = std::move(input);
    return rec;
  }

  /// Backpropagates grad w.r.t. a1 into the parameter gradients; returns the
  /// gradient w.r.t. the input.
  ChannelField<Real> back(const typename StabilizerTape<Real>::Layer2& rec, ChannelField<Real> grad,
                          WeightBank<Real>& grads, const std::string& name) const {
    activate_backward(grad, rec.a1, act1);
    c1.backward_params(rec.a0, grad, grads.get(name + ".1.weight"), &grads.get(name + ".1.bias"));
    auto g0 = c1.backward_input(grad, rec.a0.height(), rec.a0.width());
    activate_backward(g0, rec.a0, Activation::tanh);
    c0.backward_params(rec.input, g0, grads.get(name + ".0.weight"), &grads.get(name + ".0.bias"));
    return c0.backward_input(g0, rec.input.height(), rec.input.width());
  }
};

template <typename Real>
void add_into(ChannelField<Real>& dst, const ChannelField<Real>& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace detail

/// Converts a disparity sequence into a temporally consistent one.
///
/// Per frame t: the neighbouring disparities are aligned onto t, stacked with
/// d^t and encoded (FE).  A forward sweep carries a hidden state from frame 0
/// upwards, a backward sweep from frame T-1 downwards; each step warps the
/// neighbour's state onto t and updates it with the propagation encoder.  The
/// fusion head maps both states to a residual that is added to d^t.
template <typename Real>
StabilizerOutput<Real> stabilize(const ScalarSequence<Real>& disparities, const ClipFlows<Real>& flows,
                                 const WeightBank<Real>& weights, const StabilizerConfig& cfg = {},
                                 StabilizerTape<Real>* tape = nullptr) {
  detail::check_stabilizer_inputs(disparities, flows);
  const std::size_t T = disparities.size();
  const int h = disparities[0].height();
  const int w = disparities[0].width();
  const int hidden = cfg.hidden_channels;

  const detail::TwoLayer<Real> fe(weights, "fe", cfg.fe0(), cfg.fe1(), Activation::tanh);
  const detail::TwoLayer<Real> prop_f(weights, cfg.prop_name(true), cfg.prop0(), cfg.prop1(),
                                      Activation::tanh);
  const detail::TwoLayer<Real> prop_b(weights, cfg.prop_name(false), cfg.prop0(), cfg.prop1(),
                                      Activation::tanh);
  const detail::TwoLayer<Real> fusion(weights, "fusion", cfg.fusion0(), cfg.fusion1(),
                                      Activation::identity);

  Real scale = Real(1);
  if (cfg.normalize_input) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& d : disparities)
      for (Real v : d.values()) {
        acc += std::abs(double(v));
        ++n;
      }
    scale = Real(std::max(acc / double(n), 1e-6));
  }

  StabilizerTape<Real> local;
  StabilizerTape<Real>& rec = tape ? *tape : local;
  rec = StabilizerTape<Real>{};
  rec.flows = flows;
  rec.scale = scale;
  rec.height = h;
  rec.width = w;

  // Disparity features.
  ChannelSequence<Real> feats;
  for (std::size_t t = 0; t < T; ++t) {
    const auto prev = aligned_prev(disparities, flows, t);
    const auto next = aligned_next(disparities, flows, t);
    ChannelField<Real> stack(h, w, 3, Real(0));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        stack.at(y, x, 0) = prev.at(y, x) / scale;
        stack.at(y, x, 1) = disparities[t].at(y, x) / scale;
        stack.at(y, x, 2) = next.at(y, x) / scale;
      }
    rec.fe.push_back(fe.run(std::move(stack)));
    feats.push_back(rec.fe.back().a1);
  }

  StabilizerOutput<Real> out;
  out.states.forward.resize(T);
  out.states.backward.resize(T);
  rec.forward_prop.resize(T);
  rec.backward_prop.resize(T);

  for (std::size_t t = 0; t < T; ++t) {
    const ChannelField<Real> carried =
        t == 0 ? ChannelField<Real>(h, w, hidden, Real(0))
               : warp_by_flow(out.states.forward[t - 1], flows.to_prev(t));
    rec.forward_prop[t] = prop_f.run(concat_channels<Real, 0>({&carried, &feats[t]}));
    out.states.forward[t] = rec.forward_prop[t].a1;
  }
  for (std::size_t i = T; i-- > 0;) {
    const ChannelField<Real> carried =
        i + 1 == T ? ChannelField<Real>(h, w, hidden, Real(0))
                   : warp_by_flow(out.states.backward[i + 1], flows.to_next(i));
    rec.backward_prop[i] = prop_b.run(concat_channels<Real, 0>({&carried, &feats[i]}));
    out.states.backward[i] = rec.backward_prop[i].a1;
  }

  for (std::size_t t = 0; t < T; ++t) {
    rec.fusion.push_back(
        fusion.run(concat_channels<Real, 0>({&out.states.forward[t], &out.states.backward[t]})));
    const auto& head = rec.fusion.back().a1;
    ScalarField<Real> residual(h, w, Real(0));
    ScalarField<Real> corrected(h, w, Real(0));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Real r = head.at(y, x) * scale;
        residual.at(y, x) = r;
        corrected.at(y, x) = disparities[t].at(y, x) + r;
      }
    out.residual.push_back(std::move(residual));
    out.corrected.push_back(std::move(corrected));
  }
  return out;
}

/// Reverse-mode gradients of <grad_output, corrected> with respect to every
/// weight tensor.  Input disparities and flows are constants.
template <typename Real>
WeightBank<Real> stabilize_backward(const StabilizerTape<Real>& tape,
                                    const ScalarSequence<Real>& grad_output,
                                    const WeightBank<Real>& weights, const StabilizerConfig& cfg = {}) {
  if (!tape.complete()) throw ValueError("stabilize_backward: forward intermediates are missing");
  const std::size_t T = tape.fe.size();
  if (grad_output.size() != T) throw ShapeError("stabilize_backward: gradient sequence length mismatch");
  for (const auto& g : grad_output) {
    if (g.height() != tape.height || g.width() != tape.width) {
      throw ShapeError("stabilize_backward: gradient extent mismatch");
    }
  }
  const int h = tape.height;
  const int w = tape.width;
  const int hidden = cfg.hidden_channels;
  const int feat = cfg.feature_channels;

  const detail::TwoLayer<Real> fe(weights, "fe", cfg.fe0(), cfg.fe1(), Activation::tanh);
  const detail::TwoLayer<Real> prop_f(weights, cfg.prop_name(true), cfg.prop0(), cfg.prop1(),
                                      Activation::tanh);
  const detail::TwoLayer<Real> prop_b(weights, cfg.prop_name(false), cfg.prop0(), cfg.prop1(),
                                      Activation::tanh);
  const detail::TwoLayer<Real> fusion(weights, "fusion", cfg.fusion0(), cfg.fusion1(),
                                      Activation::identity);

  WeightBank<Real> grads = weights.zeros_like();
  ChannelSequence<Real> g_fwd, g_bwd, g_feat;
  for (std::size_t t = 0; t < T; ++t) {
    ChannelField<Real> g_head(h, w, 1, Real(0));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) g_head.at(y, x) = grad_output[t].at(y, x) * tape.scale;
    const auto g_in = fusion.back(tape.fusion[t], std::move(g_head), grads, "fusion");
    g_fwd.push_back(slice_channels(g_in, 0, hidden));
    g_bwd.push_back(slice_channels(g_in, hidden, hidden));
    g_feat.emplace_back(h, w, feat, Real(0));
  }

  // Forward sweep ran t = 0..T-1, so its adjoint runs downwards.
  for (std::size_t t = T; t-- > 0;) {
    const auto g_in = prop_f.back(tape.forward_prop[t], g_fwd[t], grads, cfg.prop_name(true));
    detail::add_into(g_feat[t], slice_channels(g_in, hidden, feat));
    if (t > 0) {
      detail::add_into(g_fwd[t - 1],
                       warp_by_flow_adjoint(slice_channels(g_in, 0, hidden), tape.flows.to_prev(t)));
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    const auto g_in = prop_b.back(tape.backward_prop[t], g_bwd[t], grads, cfg.prop_name(false));
    detail::add_into(g_feat[t], slice_channels(g_in, hidden, feat));
    if (t + 1 < T) {
      detail::add_into(g_bwd[t + 1],
                       warp_by_flow_adjoint(slice_channels(g_in, 0, hidden), tape.flows.to_next(t)));
    }
  }
  for (std::size_t t = 0; t < T; ++t) fe.back(tape.fe[t], std::move(g_feat[t]), grads, "fe");
  return grads;
}

}  // namespace bida
