// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bida/field.hpp"
#include "bida/warp.hpp"

namespace bida {

struct Offset {
  int dx = 0;
  int dy = 0;
  auto operator<=>(const Offset&) const = default;
};

/// Ordered set of integer offsets probed around each pixel.  The order fixes
/// the channel order of the cost volume.
class SearchRange {
 public:
  explicit SearchRange(std::vector<Offset> offsets) : offsets_(std::move(offsets)) {
    if (offsets_.empty()) throw ValueError("search range must not be empty");
    std::set<Offset> seen(offsets_.begin(), offsets_.end());
    if (seen.size() != offsets_.size()) throw ValueError("search range has duplicate offsets");
  }

  /// (-r, 0) ... (r, 0).
  static SearchRange horizontal(int radius) {
    std::vector<Offset> o;
    for (int dx = -radius; dx <= radius; ++dx) o.push_back({dx, 0});
    return SearchRange(std::move(o));
  }

  /// dx, dy in [-r, r], row-major (dy outer).
  static SearchRange square(int radius) {
    std::vector<Offset> o;
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) o.push_back({dx, dy});
    return SearchRange(std::move(o));
  }

  const std::vector<Offset>& offsets() const noexcept { return offsets_; }
  int size() const noexcept { return int(offsets_.size()); }
  bool operator==(const SearchRange&) const = default;

 private:
  std::vector<Offset> offsets_;
};

/// Alternating schedule: even iterations search (+-4, 0), odd iterations
/// (+-1, +-1).
inline SearchRange standard_ranges(int iteration) {
  if (iteration < 0) throw ValueError("standard_ranges: iteration must be >= 0");
  return iteration % 2 == 0 ? SearchRange::horizontal(4) : SearchRange::square(1);
}

/// Reduction applied to the channel-wise product.
enum class CorrelationNorm {
  mean,      ///< dot / C
  sqrt_dim,  ///< dot / sqrt(C)
  sum,       ///< dot
};

inline CorrelationNorm parse_correlation_norm(const std::string& s) {
  if (s == "mean") return CorrelationNorm::mean;
  if (s == "sqrt") return CorrelationNorm::sqrt_dim;
  if (s == "sum") return CorrelationNorm::sum;
  throw ValidationError("unknown correlation norm '" + s + "' (mean|sqrt|sum)");
}

namespace detail {
template <typename Real>
Real correlation_scale(CorrelationNorm norm, int channels) {
  switch (norm) {
    case CorrelationNorm::mean: return Real(1) / Real(channels);
    case CorrelationNorm::sqrt_dim: return Real(1) / std::sqrt(Real(channels));
    case CorrelationNorm::sum: return Real(1);
  }
  return Real(1);
}
}  // namespace detail

/// Aligns the neighbouring right-view features onto the centre frame:
/// returns (prev warped by flow_to_prev, next warped by flow_to_next).
template <typename Real>
std::pair<ChannelField<Real>, ChannelField<Real>> align_neighbors(
    const ChannelField<Real>& prev, const ChannelField<Real>& next,
    const VectorField<Real>& flow_to_prev, const VectorField<Real>& flow_to_next) {
  require_same_extent(prev, next, "align_neighbors");
  if (prev.channels() != next.channels()) throw ShapeError("align_neighbors: channel mismatch");
  return {warp_by_flow(prev, flow_to_prev), warp_by_flow(next, flow_to_next)};
}

/// Local correlation between left features and right features that have
/// already been temporally aligned.  The right features are first warped by
/// the current disparity; channel r of the output is then the normalized dot
/// product of F_L(p) and the warped right features at p + offset_r.
template <typename Real>
ChannelField<Real> correlate(const ChannelField<Real>& left, const ChannelField<Real>& right_aligned,
                             const ScalarField<Real>& disparity, const SearchRange& range,
                             CorrelationNorm norm = CorrelationNorm::mean) {
  require_same_extent(left, right_aligned, "correlate");
  require_same_extent(left, disparity, "correlate");
  if (left.channels() != right_aligned.channels()) throw ShapeError("correlate: channel mismatch");

  const auto warped = warp_by_disparity(right_aligned, disparity);
  const int h = left.height();
  const int w = left.width();
  const int c = left.channels();
  const Real scale = detail::correlation_scale<Real>(norm, c);
  const auto& offsets = range.offsets();

  ChannelField<Real> out(h, w, range.size(), Real(0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto fl = left.pixel(y, x);
      for (std::size_t r = 0; r < offsets.size(); ++r) {
        // Integer offsets: clamped integer reads, identical to a bilinear
        // sample at an integer coordinate.
        const int sx = std::clamp(x + offsets[r].dx, 0, w - 1);
        const int sy = std::clamp(y + offsets[r].dy, 0, h - 1);
        auto fr = warped.pixel(sy, sx);
        Real acc = 0;
        for (int k = 0; k < c; ++k) acc += fl[std::size_t(k)] * fr[std::size_t(k)];
        out.at(y, x, int(r)) = acc * scale;
      }
    }
  }
  return out;
}

/// Triple-frame cost volume for the centre frame: correlation of the centre
/// left features against the aligned previous, centre and aligned next right
/// features, concatenated in that channel order (3 * |range| channels).
///
/// For the first/last frame of a clip pass the centre features as the missing
/// neighbour together with a zero flow.
template <typename Real>
ChannelField<Real> triple_cost_volume(const ChannelField<Real>& left_center,
                                      const ChannelField<Real>& right_prev,
                                      const ChannelField<Real>& right_center,
                                      const ChannelField<Real>& right_next,
                                      const VectorField<Real>& flow_to_prev,
                                      const VectorField<Real>& flow_to_next,
                                      const ScalarField<Real>& disparity, const SearchRange& range,
                                      CorrelationNorm norm = CorrelationNorm::mean) {
  require_same_extent(left_center, right_center, "triple_cost_volume");
  auto [prev_aligned, next_aligned] =
      align_neighbors(right_prev, right_next, flow_to_prev, flow_to_next);
  const auto c_prev = correlate(left_center, prev_aligned, disparity, range, norm);
  const auto c_center = correlate(left_center, right_center, disparity, range, norm);
  const auto c_next = correlate(left_center, next_aligned, disparity, range, norm);
  return concat_channels<Real, 0>({&c_prev, &c_center, &c_next});
}

/// Cost volumes for every frame of a clip (edge frames replicate themselves).
template <typename Real>
ChannelSequence<Real> clip_cost_volumes(const ChannelSequence<Real>& left,
                                        const ChannelSequence<Real>& right,
                                        const ClipFlows<Real>& flows,
                                        const ScalarSequence<Real>& disparity,
                                        const SearchRange& range,
                                        CorrelationNorm norm = CorrelationNorm::mean) {
  const std::size_t T = left.size();
  if (right.size() != T || disparity.size() != T) throw ShapeError("clip_cost_volumes: length mismatch");
  ChannelSequence<Real> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const VectorField<Real> zero(left[t].height(), left[t].width());
    const bool has_prev = t > 0;
    const bool has_next = t + 1 < T;
    out.push_back(triple_cost_volume(left[t], has_prev ? right[t - 1] : right[t], right[t],
                                     has_next ? right[t + 1] : right[t],
                                     has_prev ? flows.to_prev(t) : zero,
                                     has_next ? flows.to_next(t) : zero, disparity[t], range,
                                     norm));
  }
  return out;
}

}  // namespace bida
