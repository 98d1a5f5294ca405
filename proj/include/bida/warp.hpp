// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bida/field.hpp"

namespace bida {

/// Four-neighbour footprint of one bilinear sample.  Coordinates are clamped
/// to [0, W-1] x [0, H-1] before the footprint is formed, so out-of-range
/// reads replicate the border.
template <typename Real>
struct BilinearTap {
  int x0, y0, x1, y1;
  Real fx, fy;

  static BilinearTap make(int height, int width, Real x, Real y) {
    x = std::clamp(x, Real(0), Real(width - 1));
    y = std::clamp(y, Real(0), Real(height - 1));
    BilinearTap t;
    t.x0 = std::min(int(std::floor(x)), width - 1);
    t.y0 = std::min(int(std::floor(y)), height - 1);
    t.x1 = std::min(t.x0 + 1, width - 1);
    t.y1 = std::min(t.y0 + 1, height - 1);
    t.fx = x - Real(t.x0);
    t.fy = y - Real(t.y0);
    return t;
  }

  // Lerp form: a constant neighbourhood and integer coordinates reproduce the
  // stored value bit-exactly.
  static Real lerp(Real a, Real b, Real f) { return a + f * (b - a); }

  template <typename Field>
  Real sample(const Field& f, int c) const {
    const Real top = lerp(f.at(y0, x0, c), f.at(y0, x1, c), fx);
    const Real bottom = lerp(f.at(y1, x0, c), f.at(y1, x1, c), fx);
    return lerp(top, bottom, fy);
  }

  /// Adjoint of sample(): distributes g onto the four neighbours.
  template <typename Field>
  void scatter(Field& grad, int c, Real g) const {
    const Real gt = g * (Real(1) - fy);
    const Real gb = g * fy;
    grad.at(y0, x0, c) += gt * (Real(1) - fx);
    grad.at(y0, x1, c) += gt * fx;
    grad.at(y1, x0, c) += gb * (Real(1) - fx);
    grad.at(y1, x1, c) += gb * fx;
  }
};

/// Bilinear interpolation of every channel at continuous position (x, y),
/// clamp-to-edge outside the raster.
template <typename Real, int K>
std::vector<Real> bilinear_sample(const BasicField<Real, K>& field, Real x, Real y) {
  if (field.empty()) throw ShapeError("bilinear_sample: empty field");
  const auto tap = BilinearTap<Real>::make(field.height(), field.width(), x, y);
  std::vector<Real> out(std::size_t(field.channels()));
  for (int c = 0; c < field.channels(); ++c) out[std::size_t(c)] = tap.sample(field, c);
  return out;
}

/// Backward warp: out(x, y) = field(x + u(x, y), y + v(x, y)).
template <typename Real, int K>
BasicField<Real, K> warp_by_flow(const BasicField<Real, K>& field, const VectorField<Real>& flow) {
  require_same_extent(field, flow, "warp_by_flow");
  BasicField<Real, K> out(field.height(), field.width(), field.channels(), Real(0));
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      const auto tap = BilinearTap<Real>::make(field.height(), field.width(),
                                               Real(x) + flow.at(y, x, 0),
                                               Real(y) + flow.at(y, x, 1));
      for (int c = 0; c < field.channels(); ++c) out.at(y, x, c) = tap.sample(field, c);
    }
  }
  return out;
}

/// Adjoint of warp_by_flow with respect to the warped field (flow constant).
template <typename Real, int K>
BasicField<Real, K> warp_by_flow_adjoint(const BasicField<Real, K>& grad_out,
                                         const VectorField<Real>& flow) {
  require_same_extent(grad_out, flow, "warp_by_flow_adjoint");
  BasicField<Real, K> grad(grad_out.height(), grad_out.width(), grad_out.channels(), Real(0));
  for (int y = 0; y < grad_out.height(); ++y) {
    for (int x = 0; x < grad_out.width(); ++x) {
      const auto tap = BilinearTap<Real>::make(grad_out.height(), grad_out.width(),
                                               Real(x) + flow.at(y, x, 0),
                                               Real(y) + flow.at(y, x, 1));
      for (int c = 0; c < grad_out.channels(); ++c) tap.scatter(grad, c, grad_out.at(y, x, c));
    }
  }
  return grad;
}

/// Right-to-left alignment: out(x, y) = field(x - d(x, y), y).
template <typename Real, int K>
BasicField<Real, K> warp_by_disparity(const BasicField<Real, K>& field,
                                      const ScalarField<Real>& disparity) {
  require_same_extent(field, disparity, "warp_by_disparity");
  BasicField<Real, K> out(field.height(), field.width(), field.channels(), Real(0));
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      const auto tap = BilinearTap<Real>::make(field.height(), field.width(),
                                               Real(x) - disparity.at(y, x), Real(y));
      for (int c = 0; c < field.channels(); ++c) out.at(y, x, c) = tap.sample(field, c);
    }
  }
  return out;
}

/// Bilinear resize to an explicit raster size with pixel-centre alignment
/// (source coordinate = (x + 0.5) * W / W' - 0.5).  Values are not rescaled.
template <typename Real, int K>
BasicField<Real, K> resize_bilinear(const BasicField<Real, K>& field, int height, int width) {
  if (height < 1 || width < 1) throw ShapeError("resize_bilinear: target size must be >= 1");
  if (height == field.height() && width == field.width()) return field;
  BasicField<Real, K> out(height, width, field.channels(), Real(0));
  const double sy = double(field.height()) / double(height);
  const double sx = double(field.width()) / double(width);
  for (int y = 0; y < height; ++y) {
    const Real src_y = Real((y + 0.5) * sy - 0.5);
    for (int x = 0; x < width; ++x) {
      const Real src_x = Real((x + 0.5) * sx - 0.5);
      const auto tap = BilinearTap<Real>::make(field.height(), field.width(), src_x, src_y);
      for (int c = 0; c < field.channels(); ++c) out.at(y, x, c) = tap.sample(field, c);
    }
  }
  return out;
}

namespace detail {
inline int scaled_extent(int n, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValueError("resample scale must be > 0");
  const long r = std::lround(double(n) * scale);
  if (r < 1) throw ShapeError("resample: scaled extent rounds to zero");
  return int(r);
}
}  // namespace detail

/// Resizes a displacement field to (height, width) and rescales (u, v) by the
/// per-axis size ratio so displacements stay valid in the new pixel grid.
template <typename Real>
VectorField<Real> resize_flow(const VectorField<Real>& flow, int height, int width) {
  auto out = resize_bilinear(flow, height, width);
  const Real ru = Real(double(width) / double(flow.width()));
  const Real rv = Real(double(height) / double(flow.height()));
  if (ru == Real(1) && rv == Real(1)) return out;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.at(y, x, 0) *= ru;
      out.at(y, x, 1) *= rv;
    }
  }
  return out;
}

/// Resizes a disparity map, rescaling values by the horizontal size ratio.
template <typename Real>
ScalarField<Real> resize_disparity(const ScalarField<Real>& d, int height, int width) {
  auto out = resize_bilinear(d, height, width);
  const Real r = Real(double(width) / double(d.width()));
  if (r == Real(1)) return out;
  for (auto& v : out.values()) v *= r;
  return out;
}

/// Spatial resampling by `scale` (output extent = round(scale * extent)).
template <typename Real>
VectorField<Real> resample_flow(const VectorField<Real>& flow, double scale) {
  return resize_flow(flow, detail::scaled_extent(flow.height(), scale),
                     detail::scaled_extent(flow.width(), scale));
}

template <typename Real>
ScalarField<Real> resample_disparity(const ScalarField<Real>& d, double scale) {
  return resize_disparity(d, detail::scaled_extent(d.height(), scale),
                          detail::scaled_extent(d.width(), scale));
}

inline constexpr double kOcclusionAlpha = 0.01;
inline constexpr double kOcclusionBeta = 0.5;

/// Forward-backward flow consistency mask on the grid of `flow_ab`.
///
/// `flow_ab` lives on frame A and points into frame B; `flow_ba` lives on B
/// and points back into A.  A pixel is valid (1) iff
///   |f_ab(p) + f_ba(p + f_ab(p))|^2 < alpha (|f_ab(p)|^2 + |f_ba(p + f_ab(p))|^2) + beta.
template <typename Real>
ScalarField<Real> fb_occlusion_mask(const VectorField<Real>& flow_ab,
                                    const VectorField<Real>& flow_ba,
                                    double alpha = kOcclusionAlpha,
                                    double beta = kOcclusionBeta) {
  require_same_extent(flow_ab, flow_ba, "fb_occlusion_mask");
  ScalarField<Real> mask(flow_ab.height(), flow_ab.width(), Real(0));
  for (int y = 0; y < flow_ab.height(); ++y) {
    for (int x = 0; x < flow_ab.width(); ++x) {
      const double u = flow_ab.at(y, x, 0);
      const double v = flow_ab.at(y, x, 1);
      const auto tap = BilinearTap<Real>::make(flow_ab.height(), flow_ab.width(),
                                               Real(x) + flow_ab.at(y, x, 0),
                                               Real(y) + flow_ab.at(y, x, 1));
      const double bu = tap.sample(flow_ba, 0);
      const double bv = tap.sample(flow_ba, 1);
      const double ru = u + bu;
      const double rv = v + bv;
      const double lhs = ru * ru + rv * rv;
      const double rhs = alpha * (u * u + v * v + bu * bu + bv * bv) + beta;
      mask.at(y, x) = lhs < rhs ? Real(1) : Real(0);
    }
  }
  return mask;
}

inline constexpr double kDepthEpsilon = 1e-3;

/// D = focal_px * baseline_m / max(d, eps).
template <typename Real>
ScalarField<Real> disparity_to_depth(const ScalarField<Real>& d, const Calibration& cal,
                                     double eps = kDepthEpsilon) {
  cal.validate();
  if (!(eps > 0.0)) throw ValueError("disparity_to_depth: eps must be > 0");
  const double fb = cal.focal_px * cal.baseline_m;
  ScalarField<Real> out(d.height(), d.width(), Real(0));
  auto src = d.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = Real(fb / std::max(double(src[i]), eps));
  }
  return out;
}

template <typename Real>
ScalarSequence<Real> disparity_to_depth(const ScalarSequence<Real>& seq, const Calibration& cal,
                                        double eps = kDepthEpsilon) {
  ScalarSequence<Real> out;
  out.reserve(seq.size());
  for (const auto& d : seq) out.push_back(disparity_to_depth(d, cal, eps));
  return out;
}

/// Bidirectional flows of a clip of T frames.
///
/// forward[t] lives on frame t and points into frame t+1; backward[t] lives
/// on frame t+1 and points into frame t (t = 0 .. T-2).  Aligning frame t-1
/// onto frame t therefore uses backward[t-1]; aligning t+1 onto t uses
/// forward[t].
template <typename Real>
struct ClipFlows {
  VectorSequence<Real> forward;
  VectorSequence<Real> backward;

  std::size_t transitions() const noexcept { return forward.size(); }

  bool operator==(const ClipFlows&) const = default;

  void validate(std::size_t frames, int height, int width) const {
    const std::size_t want = frames == 0 ? 0 : frames - 1;
    if (forward.size() != want || backward.size() != want) {
      throw ShapeError("clip flows: expected " + std::to_string(want) +
                       " flows per direction, got " + std::to_string(forward.size()) + "/" +
                       std::to_string(backward.size()));
    }
    for (std::size_t i = 0; i < want; ++i) {
      if (forward[i].height() != height || forward[i].width() != width ||
          backward[i].height() != height || backward[i].width() != width) {
        throw ShapeError("clip flows: flow " + std::to_string(i) + " has the wrong extent");
      }
    }
  }

  /// Flow on frame t pointing into t-1 (requires t >= 1).
  const VectorField<Real>& to_prev(std::size_t t) const { return backward.at(t - 1); }
  /// Flow on frame t pointing into t+1 (requires t + 1 < T).
  const VectorField<Real>& to_next(std::size_t t) const { return forward.at(t); }

  ClipFlows resized(int height, int width) const {
    ClipFlows out;
    for (const auto& f : forward) out.forward.push_back(resize_flow(f, height, width));
    for (const auto& f : backward) out.backward.push_back(resize_flow(f, height, width));
    return out;
  }

  /// Flows of the time-reversed clip.
  ClipFlows reversed() const {
    ClipFlows out;
    out.forward.assign(backward.rbegin(), backward.rend());
    out.backward.assign(forward.rbegin(), forward.rend());
    return out;
  }
};

/// seq[t-1] aligned onto frame t; frame 0 replicates itself.
template <typename Real, int K>
BasicField<Real, K> aligned_prev(const std::vector<BasicField<Real, K>>& seq,
                                 const ClipFlows<Real>& flows, std::size_t t) {
  if (t == 0) return seq[0];
  return warp_by_flow(seq[t - 1], flows.to_prev(t));
}

/// seq[t+1] aligned onto frame t; the last frame replicates itself.
template <typename Real, int K>
BasicField<Real, K> aligned_next(const std::vector<BasicField<Real, K>>& seq,
                                 const ClipFlows<Real>& flows, std::size_t t) {
  if (t + 1 >= seq.size()) return seq[t];
  return warp_by_flow(seq[t + 1], flows.to_next(t));
}

/// Validity of frame t pixels in frame t+1 (forward-backward check).
template <typename Real>
ScalarField<Real> next_visibility_mask(const ClipFlows<Real>& flows, std::size_t t,
                                       double alpha = kOcclusionAlpha,
                                       double beta = kOcclusionBeta) {
  return fb_occlusion_mask(flows.forward.at(t), flows.backward.at(t), alpha, beta);
}

/// Validity of frame t pixels in frame t-1.
template <typename Real>
ScalarField<Real> prev_visibility_mask(const ClipFlows<Real>& flows, std::size_t t,
                                       double alpha = kOcclusionAlpha,
                                       double beta = kOcclusionBeta) {
  return fb_occlusion_mask(flows.backward.at(t - 1), flows.forward.at(t - 1), alpha, beta);
}

}  // namespace bida
