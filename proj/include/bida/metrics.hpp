// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bida/field.hpp"
#include "bida/flow_provider.hpp"
#include "bida/parallel.hpp"
#include "bida/ssim.hpp"
#include "bida/warp.hpp"

namespace bida {

inline constexpr double kRtcThreshold = 1.01;
inline constexpr double kOpwSharpness = 50.0;

namespace detail {
template <typename Real>
void check_sequence(const ScalarSequence<Real>& d, const ScalarSequence<Real>& gt, const char* what) {
  if (d.size() != gt.size()) throw ShapeError(std::string(what) + ": frame count mismatch");
  if (d.empty()) throw ShapeError(std::string(what) + ": empty sequence");
  for (std::size_t t = 0; t < d.size(); ++t) require_same_extent(d[t], gt[t], what);
}

template <typename Real>
bool is_valid(const ScalarField<Real>* mask, int y, int x) {
  return mask == nullptr || mask->at(y, x) > Real(0.5);
}

template <typename Real>
const ScalarField<Real>* mask_at(const ScalarSequence<Real>* masks, std::size_t t) {
  if (masks == nullptr || masks->empty()) return nullptr;
  return &masks->at(t);
}

// Sum of per-frame terms computed in parallel and reduced in frame order.
template <typename Fn>
std::vector<double> per_frame(std::size_t n, Fn&& fn) {
  std::vector<double> out(n, 0.0);
  parallel_for(int(n), [&](int i) { out[std::size_t(i)] = fn(std::size_t(i)); });
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}
}  // namespace detail

/// Mean |d - gt| over valid pixels (all pixels when `valid` is null).
template <typename Real>
double epe(const ScalarField<Real>& d, const ScalarField<Real>& gt, const ScalarField<Real>* valid = nullptr) {
  require_same_extent(d, gt, "epe");
  if (valid) require_same_extent(d, *valid, "epe");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (detail::is_valid(valid, y, x)) {
        sum += std::abs(double(d.at(y, x)) - double(gt.at(y, x)));
        ++n;
      }
  if (n == 0) throw ValueError("epe: empty valid set");
  return sum / double(n);
}

/// Percentage of valid pixels with |d - gt| > n.
template <typename Real>
double bad_rate(const ScalarField<Real>& d, const ScalarField<Real>& gt, double n,
                const ScalarField<Real>* valid = nullptr) {
  require_same_extent(d, gt, "bad_rate");
  if (valid) require_same_extent(d, *valid, "bad_rate");
  std::size_t bad = 0, count = 0;
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (detail::is_valid(valid, y, x)) {
        bad += std::abs(double(d.at(y, x)) - double(gt.at(y, x))) > n ? 1 : 0;
        ++count;
      }
  if (count == 0) throw ValueError("bad_rate: empty valid set");
  return 100.0 * double(bad) / double(count);
}

/// Sequence EPE: pooled over all frames and valid pixels.
template <typename Real>
double epe(const ScalarSequence<Real>& d, const ScalarSequence<Real>& gt,
           const ScalarSequence<Real>* valid = nullptr) {
  detail::check_sequence(d, gt, "epe");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < d.size(); ++t) {
    const auto* m = detail::mask_at(valid, t);
    for (int y = 0; y < d[t].height(); ++y)
      for (int x = 0; x < d[t].width(); ++x)
        if (detail::is_valid(m, y, x)) {
          sum += std::abs(double(d[t].at(y, x)) - double(gt[t].at(y, x)));
          ++n;
        }
  }
  if (n == 0) throw ValueError("epe: empty valid set");
  return sum / double(n);
}

template <typename Real>
double bad_rate(const ScalarSequence<Real>& d, const ScalarSequence<Real>& gt, double n,
                const ScalarSequence<Real>* valid = nullptr) {
  detail::check_sequence(d, gt, "bad_rate");
  std::size_t bad = 0, count = 0;
  for (std::size_t t = 0; t < d.size(); ++t) {
    const auto* m = detail::mask_at(valid, t);
    for (int y = 0; y < d[t].height(); ++y)
      for (int x = 0; x < d[t].width(); ++x)
        if (detail::is_valid(m, y, x)) {
          bad += std::abs(double(d[t].at(y, x)) - double(gt[t].at(y, x))) > n ? 1 : 0;
          ++count;
        }
  }
  if (count == 0) throw ValueError("bad_rate: empty valid set");
  return 100.0 * double(bad) / double(count);
}

/// Per-pixel temporal error |(d^t - d^{t+1}) - (gt^t - gt^{t+1})| for one
/// transition; returns (sum, bad count over n, valid count).
namespace detail {
struct TemporalTally {
  double sum = 0.0;
  std::size_t bad = 0;
  std::size_t count = 0;
};

template <typename Real>
TemporalTally temporal_tally(const ScalarSequence<Real>& d, const ScalarSequence<Real>& gt, std::size_t t,
                             double n, const ScalarSequence<Real>* valid) {
  TemporalTally r;
  const auto* m0 = mask_at(valid, t);
  const auto* m1 = mask_at(valid, t + 1);
  for (int y = 0; y < d[t].height(); ++y)
    for (int x = 0; x < d[t].width(); ++x) {
      if (!is_valid(m0, y, x) || !is_valid(m1, y, x)) continue;
      const double dp = double(d[t].at(y, x)) - double(d[t + 1].at(y, x));
      const double dg = double(gt[t].at(y, x)) - double(gt[t + 1].at(y, x));
      const double e = std::abs(dp - dg);
      r.sum += e;
      r.bad += e > n ? 1 : 0;
      ++r.count;
    }
  return r;
}
}  // namespace detail

/// Per-transition TEPE values (T-1 entries).
template <typename Real>
std::vector<double> tepe_per_transition(const ScalarSequence<Real>& d, const ScalarSequence<Real>& gt,
                                        const ScalarSequence<Real>* valid = nullptr) {
  detail::check_sequence(d, gt, "tepe");
  if (d.size() < 2) throw ShapeError("tepe: needs at least 2 frames");
  return detail::per_frame(d.size() - 1, [&](std::size_t t) {
    const auto r = detail::temporal_tally(d, gt, t, 0.0, valid);
    if (r.count == 0) throw ValueError("tepe: empty valid set");
    return r.sum / double(r.count);
  });
}

/// Mean over transitions of the mean temporal end-point error.
template <typename Real>
double tepe(const ScalarSequence<Real>& d, const ScalarSequence<Real>& gt,
            const ScalarSequence<Real>* valid = nullptr) {
  return detail::mean_of(tepe_per_transition(d, gt, valid));
}

/// Percentage of (transition, pixel) pairs with temporal error > n.
template <typename Real>
double temporal_bad_rate(const ScalarSequence<Real>& d, const ScalarSequence<Real>& gt, double n,
                         const ScalarSequence<Real>* valid = nullptr) {
  detail::check_sequence(d, gt, "temporal_bad_rate");
  if (d.size() < 2) throw ShapeError("temporal_bad_rate: needs at least 2 frames");
  std::size_t bad = 0, count = 0;
  for (std::size_t t = 0; t + 1 < d.size(); ++t) {
    const auto r = detail::temporal_tally(d, gt, t, n, valid);
    bad += r.bad;
    count += r.count;
  }
  if (count == 0) throw ValueError("temporal_bad_rate: empty valid set");
  return 100.0 * double(bad) / double(count);
}

/// Photometric gate exp(-50 |I_hat - I|) averaged over colour channels,
/// clamped to [0, 1].
template <typename Real>
ScalarField<Real> photometric_mask(const ChannelField<Real>& warped_next, const ChannelField<Real>& current) {
  require_same_extent(warped_next, current, "photometric_mask");
  if (warped_next.channels() != current.channels()) throw ShapeError("photometric_mask: channel mismatch");
  ScalarField<Real> out(current.height(), current.width(), Real(0));
  const int C = current.channels();
  for (int y = 0; y < current.height(); ++y)
    for (int x = 0; x < current.width(); ++x) {
      double diff = 0.0;
      for (int c = 0; c < C; ++c) diff += std::abs(double(warped_next.at(y, x, c)) - double(current.at(y, x, c)));
      diff /= double(C);
      out.at(y, x) = Real(std::clamp(std::exp(-kOpwSharpness * diff), 0.0, 1.0));
    }
  return out;
}

struct OpwResult {
  double value = 0.0;
  std::vector<double> per_transition;
  bool empty = false;  ///< no pixel inside the depth range
};

/// Mean over transitions and pixels of O^t V^t |D_hat^{t+1} - D^t|, where
/// D_hat^{t+1} is D^{t+1} warped onto frame t by the forward flow, O^t the
/// photometric gate and V^t the forward-backward flow validity.  With
/// `range_m` only pixels with D^t < range_m are counted.
template <typename Real>
OpwResult opw(const ScalarSequence<Real>& depth, const ChannelSequence<Real>& images, const ClipFlows<Real>& flows,
              std::optional<double> range_m = std::nullopt) {
  const std::size_t T = depth.size();
  if (T < 2) throw ShapeError("opw: needs at least 2 frames");
  if (images.size() != T) throw ShapeError("opw: image count mismatch");
  flows.validate(T, depth[0].height(), depth[0].width());
  std::vector<std::size_t> counts(T - 1, 0);
  OpwResult r;
  r.per_transition = detail::per_frame(T - 1, [&](std::size_t t) {
    const auto& f = flows.forward[t];
    const auto warped_depth = warp_by_flow(depth[t + 1], f);
    const auto gate = photometric_mask(warp_by_flow(images[t + 1], f), images[t]);
    const auto valid = next_visibility_mask(flows, t);
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        const double dt = depth[t].at(y, x);
        if (range_m && !(dt < *range_m)) continue;
        ++n;
        if (valid.at(y, x) == Real(0)) continue;
        sum += double(gate.at(y, x)) * std::abs(double(warped_depth.at(y, x)) - dt);
      }
    counts[t] = n;
    return n == 0 ? 0.0 : sum / double(n);
  });
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    if (counts[t] == 0) continue;
    sum += r.per_transition[t];
    ++used;
  }
  r.empty = used == 0;
  r.value = r.empty ? 0.0 : sum / double(used);
  return r;
}

struct SequenceScore {
  double value = 0.0;
  std::vector<double> per_transition;
};

/// Mean over transitions of the fraction of flow-valid pixels whose depth
/// ratio max(D_hat/D, D/D_hat) stays strictly below 1.01.
template <typename Real>
SequenceScore rtc(const ScalarSequence<Real>& depth, const ClipFlows<Real>& flows) {
  const std::size_t T = depth.size();
  if (T < 2) throw ShapeError("rtc: needs at least 2 frames");
  flows.validate(T, depth[0].height(), depth[0].width());
  SequenceScore s;
  s.per_transition = detail::per_frame(T - 1, [&](std::size_t t) {
    const auto warped = warp_by_flow(depth[t + 1], flows.forward[t]);
    const auto valid = next_visibility_mask(flows, t);
    std::size_t good = 0, n = 0;
    for (int y = 0; y < valid.height(); ++y)
      for (int x = 0; x < valid.width(); ++x) {
        if (valid.at(y, x) == Real(0)) continue;
        const double a = warped.at(y, x);
        const double b = depth[t].at(y, x);
        if (!(a > 0.0 && b > 0.0)) throw ValueError("rtc: depths must be positive");
        ++n;
        good += std::max(a / b, b / a) < kRtcThreshold ? 1 : 0;
      }
    if (n == 0) throw ValueError("rtc: empty valid set at transition " + std::to_string(t));
    return double(good) / double(n);
  });
  s.value = detail::mean_of(s.per_transition);
  return s;
}

/// |D_hat^{t+1} - D^t| on frame t, zeroed where the flow is invalid.
template <typename Real>
ScalarField<Real> temporal_change(const ScalarSequence<Real>& depth, const ClipFlows<Real>& flows, std::size_t t) {
  const auto warped = warp_by_flow(depth[t + 1], flows.forward[t]);
  const auto valid = next_visibility_mask(flows, t);
  ScalarField<Real> out(warped.height(), warped.width(), Real(0));
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      if (valid.at(y, x) != Real(0)) out.at(y, x) = std::abs(warped.at(y, x) - depth[t].at(y, x));
  return out;
}

/// Mean over transitions of SSIM between predicted and ground-truth
/// temporal change maps.
template <typename Real>
SequenceScore tcc(const ScalarSequence<Real>& depth, const ScalarSequence<Real>& depth_gt, const ClipFlows<Real>& flows) {
  detail::check_sequence(depth, depth_gt, "tcc");
  const std::size_t T = depth.size();
  if (T < 2) throw ShapeError("tcc: needs at least 2 frames");
  flows.validate(T, depth[0].height(), depth[0].width());
  SequenceScore s;
  s.per_transition = detail::per_frame(T - 1, [&](std::size_t t) {
    return ssim(temporal_change(depth, flows, t), temporal_change(depth_gt, flows, t));
  });
  s.value = detail::mean_of(s.per_transition);
  return s;
}

/// Mean over transitions of the component-averaged SSIM between the motion
/// estimated on (D^t, D_hat^{t+1}) and on the ground-truth pair.
template <typename Real>
SequenceScore tcm(const ScalarSequence<Real>& depth, const ScalarSequence<Real>& depth_gt, const ClipFlows<Real>& flows,
                  const FlowProvider<Real>& provider) {
  detail::check_sequence(depth, depth_gt, "tcm");
  const std::size_t T = depth.size();
  if (T < 2) throw ShapeError("tcm: needs at least 2 frames");
  flows.validate(T, depth[0].height(), depth[0].width());
  SequenceScore s;
  s.per_transition = detail::per_frame(T - 1, [&](std::size_t t) {
    const auto& f = flows.forward[t];
    const auto mp = provider.flow(depth[t], warp_by_flow(depth[t + 1], f), {t, false});
    const auto mg = provider.flow(depth_gt[t], warp_by_flow(depth_gt[t + 1], f), {t, true});
    require_same_extent(mp, depth[t], "tcm provider");
    require_same_extent(mg, depth[t], "tcm provider");
    double acc = 0.0;
    for (int c = 0; c < 2; ++c) {
      acc += ssim(field_as<ScalarField<Real>>(slice_channels(mp, c, 1)),
                  field_as<ScalarField<Real>>(slice_channels(mg, c, 1)));
    }
    return acc / 2.0;
  });
  s.value = detail::mean_of(s.per_transition);
  return s;
}

/// Everything the metric suite needs for one clip.
template <typename Real>
struct ClipEvaluationInput {
  std::string clip_id;
  Calibration calibration;
  ChannelSequence<Real> left;
  ClipFlows<Real> flows;
  ScalarSequence<Real> disparity_gt;
  ScalarSequence<Real> disparity_pred;
  ScalarSequence<Real> valid;  ///< optional per-frame validity (empty = all pixels)
};

struct MetricOptions {
  std::vector<double> bad_thresholds{1.0, 3.0};
  std::vector<double> opw_ranges_m{100.0, 50.0, 30.0};
};

struct MetricReport {
  std::string clip_id;
  std::size_t frames = 0;
  Calibration calibration;
  std::vector<std::string> masks_used;
  std::string flow_provider;
  /// Aggregate values keyed by metric name (e.g. "EPE", "OPW_30").
  std::map<std::string, double> scalars;
  /// Per-frame (T entries) or per-transition (T-1 entries) breakdowns.
  std::map<std::string, std::vector<double>> per_frame;
};

inline std::string threshold_label(double n) {
  const double r = std::round(n);
  if (r == n) return std::to_string(long(r));
  std::string s = std::to_string(n);
  while (!s.empty() && s.back() == '0') s.pop_back();
  return s;
}

template <typename Real>
MetricReport evaluate_clip(const ClipEvaluationInput<Real>& in, const FlowProvider<Real>& provider,
                           const MetricOptions& opt = {}) {
  const std::size_t T = in.disparity_pred.size();
  detail::check_sequence(in.disparity_pred, in.disparity_gt, "evaluate_clip");
  if (T < 2) throw ShapeError("evaluate_clip: needs at least 2 frames");
  if (in.left.size() != T) throw ShapeError("evaluate_clip: image count mismatch");
  if (!in.valid.empty() && in.valid.size() != T) throw ShapeError("evaluate_clip: mask count mismatch");
  in.flows.validate(T, in.disparity_pred[0].height(), in.disparity_pred[0].width());

  MetricReport r;
  r.clip_id = in.clip_id;
  r.frames = T;
  r.calibration = in.calibration;
  r.flow_provider = provider.name();
  r.masks_used = {"flow_fb_consistency", "photometric_gate"};
  if (!in.valid.empty()) r.masks_used.push_back("valid");
  const auto* valid = in.valid.empty() ? nullptr : &in.valid;

  std::vector<double> frame_epe;
  for (std::size_t t = 0; t < T; ++t) {
    frame_epe.push_back(epe(in.disparity_pred[t], in.disparity_gt[t], detail::mask_at(valid, t)));
  }
  r.per_frame["EPE"] = frame_epe;
  r.scalars["EPE"] = epe(in.disparity_pred, in.disparity_gt, valid);
  for (double n : opt.bad_thresholds) {
    r.scalars["delta_" + threshold_label(n) + "px"] = bad_rate(in.disparity_pred, in.disparity_gt, n, valid);
    r.scalars["delta_t_" + threshold_label(n) + "px"] =
        temporal_bad_rate(in.disparity_pred, in.disparity_gt, n, valid);
  }
  r.per_frame["TEPE"] = tepe_per_transition(in.disparity_pred, in.disparity_gt, valid);
  r.scalars["TEPE"] = detail::mean_of(r.per_frame["TEPE"]);

  const auto depth = disparity_to_depth(in.disparity_pred, in.calibration);
  const auto depth_gt = disparity_to_depth(in.disparity_gt, in.calibration);
  const auto o = opw(depth, in.left, in.flows);
  r.scalars["OPW"] = o.value;
  r.per_frame["OPW"] = o.per_transition;
  for (double m : opt.opw_ranges_m) {
    const auto on = opw(depth, in.left, in.flows, m);
    if (!on.empty) r.scalars["OPW_" + threshold_label(m)] = on.value;
  }
  const auto rt = rtc(depth, in.flows);
  r.scalars["RTC"] = rt.value;
  r.per_frame["RTC"] = rt.per_transition;
  const auto tc = tcc(depth, depth_gt, in.flows);
  r.scalars["TCC"] = tc.value;
  r.per_frame["TCC"] = tc.per_transition;
  const auto tm = tcm(depth, depth_gt, in.flows, provider);
  r.scalars["TCM"] = tm.value;
  r.per_frame["TCM"] = tm.per_transition;

  for (const auto& [k, v] : r.scalars) {
    if (!std::isfinite(v)) throw NumericError("metric " + k + " is not finite");
  }
  return r;
}

}  // namespace bida
