// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bida/field.hpp"
#include "bida/warp.hpp"

namespace bida {

struct LossConfig {
  double gamma = 0.9;
  double lambda = 0.2;
  double occlusion_alpha = kOcclusionAlpha;
  double occlusion_beta = kOcclusionBeta;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ValueError("loss: gamma must lie in (0, 1]");
    if (!(lambda >= 0.0)) throw ValueError("loss: lambda must be >= 0");
  }
};

/// Per-frame occlusion masks for the temporal loss.  prev[t] marks frame-t
/// pixels visible in t-1 (empty for t = 0), next[t] those visible in t+1
/// (empty for t = T-1).
template <typename Real>
struct TemporalMasks {
  ScalarSequence<Real> prev;
  ScalarSequence<Real> next;
};

template <typename Real>
TemporalMasks<Real> temporal_masks(const ClipFlows<Real>& flows, std::size_t frames,
                                   double alpha = kOcclusionAlpha, double beta = kOcclusionBeta) {
  TemporalMasks<Real> m;
  m.prev.resize(frames);
  m.next.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    if (t > 0) m.prev[t] = prev_visibility_mask(flows, t, alpha, beta);
    if (t + 1 < frames) m.next[t] = next_visibility_mask(flows, t, alpha, beta);
  }
  return m;
}

namespace detail {
template <typename Real>
double mean_abs_diff(const ScalarField<Real>& a, const ScalarField<Real>& b) {
  require_same_extent(a, b, "loss");
  double acc = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(double(av[i]) - double(bv[i]));
  return acc / double(av.size());
}

template <typename Real>
double masked_mean_abs_diff(const ScalarField<Real>& a, const ScalarField<Real>& b,
                            const ScalarField<Real>& mask) {
  require_same_extent(a, b, "loss");
  require_same_extent(a, mask, "loss");
  double acc = 0.0;
  auto av = a.values();
  auto bv = b.values();
  auto mv = mask.values();
  for (std::size_t i = 0; i < av.size(); ++i) acc += double(mv[i]) * std::abs(double(av[i]) - double(bv[i]));
  return acc / double(av.size());
}

template <typename Real>
Real sign(Real v) {
  return v > Real(0) ? Real(1) : (v < Real(0) ? Real(-1) : Real(0));
}
}  // namespace detail

/// sum_t sum_n gamma^(N-n) mean_p |gt^t - d_n^t|.  predictions[n] holds the
/// n-th refinement of every frame, already at ground-truth resolution.
template <typename Real>
double spatial_loss(const std::vector<ScalarSequence<Real>>& predictions, const ScalarSequence<Real>& gt,
                    double gamma = 0.9) {
  if (predictions.empty()) throw ShapeError("spatial_loss: need at least one prediction");
  if (gt.empty()) throw ShapeError("spatial_loss: empty ground truth");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValueError("spatial_loss: gamma must lie in (0, 1]");
  const std::size_t N = predictions.size();
  double total = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      if (predictions[n].size() != gt.size()) throw ShapeError("spatial_loss: frame count mismatch");
      total += std::pow(gamma, double(N - 1 - n)) * detail::mean_abs_diff(gt[t], predictions[n][t]);
    }
  }
  return total;
}

/// Single-prediction form (N = 1).
template <typename Real>
double spatial_loss(const ScalarSequence<Real>& prediction, const ScalarSequence<Real>& gt) {
  return spatial_loss(std::vector<ScalarSequence<Real>>{prediction}, gt, 1.0);
}

/// d/d prediction of the N = 1 spatial loss (subgradient 0 at ties).
template <typename Real>
ScalarSequence<Real> spatial_loss_gradient(const ScalarSequence<Real>& prediction,
                                           const ScalarSequence<Real>& gt) {
  if (prediction.size() != gt.size()) throw ShapeError("spatial_loss_gradient: frame count mismatch");
  ScalarSequence<Real> out;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    require_same_extent(prediction[t], gt[t], "spatial_loss_gradient");
    ScalarField<Real> g(gt[t].height(), gt[t].width(), Real(0));
    const Real inv = Real(1) / Real(g.pixels());
    auto p = prediction[t].values();
    auto q = gt[t].values();
    auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = detail::sign(p[i] - q[i]) * inv;
    out.push_back(std::move(g));
  }
  return out;
}

/// sum over interior frames t of
///   mean_p [ O_prev |A(d^{t-1}) - d^t| + O_next |A(d^{t+1}) - d^t| ].
/// Warped disparities are not rescaled.  Clips shorter than 3 frames give 0.
template <typename Real>
double temporal_loss(const ScalarSequence<Real>& d, const ClipFlows<Real>& flows,
                     const TemporalMasks<Real>& masks) {
  const std::size_t T = d.size();
  if (T < 3) return 0.0;
  flows.validate(T, d[0].height(), d[0].width());
  if (masks.prev.size() != T || masks.next.size() != T) throw ShapeError("temporal_loss: mask count mismatch");
  double total = 0.0;
  for (std::size_t t = 1; t + 1 < T; ++t) {
    const auto prev = warp_by_flow(d[t - 1], flows.to_prev(t));
    const auto next = warp_by_flow(d[t + 1], flows.to_next(t));
    total += detail::masked_mean_abs_diff(prev, d[t], masks.prev[t]) +
             detail::masked_mean_abs_diff(next, d[t], masks.next[t]);
  }
  return total;
}

template <typename Real>
ScalarSequence<Real> temporal_loss_gradient(const ScalarSequence<Real>& d, const ClipFlows<Real>& flows,
                                            const TemporalMasks<Real>& masks) {
  const std::size_t T = d.size();
  ScalarSequence<Real> grad;
  for (const auto& f : d) grad.emplace_back(f.height(), f.width(), Real(0));
  if (T < 3) return grad;
  for (std::size_t t = 1; t + 1 < T; ++t) {
    const Real inv = Real(1) / Real(d[t].pixels());
    for (int side = 0; side < 2; ++side) {
      const bool is_prev = side == 0;
      const auto& flow = is_prev ? flows.to_prev(t) : flows.to_next(t);
      const auto& src = is_prev ? d[t - 1] : d[t + 1];
      const auto& mask = is_prev ? masks.prev[t] : masks.next[t];
      const auto warped = warp_by_flow(src, flow);
      ScalarField<Real> g_warped(d[t].height(), d[t].width(), Real(0));
      for (int y = 0; y < d[t].height(); ++y)
        for (int x = 0; x < d[t].width(); ++x) {
          const Real s = mask.at(y, x) * detail::sign(warped.at(y, x) - d[t].at(y, x)) * inv;
          g_warped.at(y, x) = s;
          grad[t].at(y, x) -= s;
        }
      const auto g_src = warp_by_flow_adjoint(g_warped, flow);
      auto& dst = grad[is_prev ? t - 1 : t + 1];
      for (std::size_t i = 0; i < dst.values().size(); ++i) dst.values()[i] += g_src.values()[i];
    }
  }
  return grad;
}

inline double total_loss(double spatial, double temporal, double lambda) {
  return spatial + lambda * temporal;
}

}  // namespace bida
