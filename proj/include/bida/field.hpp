// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "bida/error.hpp"

namespace bida {

/// Dense H x W raster, row-major, channel-minor.
///
/// `FixedChannels` pins the channel count at compile time (1 for scalar
/// rasters, 2 for displacement fields); 0 leaves it dynamic.  The three
/// aliases below are distinct types so a flow cannot be passed where a
/// disparity is expected.
template <typename Real, int FixedChannels>
class BasicField {
  static_assert(std::is_floating_point_v<Real>);
  static_assert(FixedChannels >= 0);

 public:
  using value_type = Real;
  static constexpr int kFixedChannels = FixedChannels;

  BasicField() = default;

  /// Constant-filled field.
  BasicField(int height, int width, Real fill = Real(0))
    requires(FixedChannels > 0)
      : BasicField(height, width, FixedChannels, fill) {}

  BasicField(int height, int width, int channels, Real fill)
      : height_(height), width_(width), channels_(channels) {
    check_dims();
    if (!std::isfinite(fill)) throw ValueError("field fill value is not finite");
    data_.assign(size(), fill);
  }

  BasicField(int height, int width, std::vector<Real> data)
    requires(FixedChannels > 0)
      : BasicField(height, width, FixedChannels, std::move(data)) {}

  BasicField(int height, int width, int channels, std::vector<Real> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims();
    if (data_.size() != size()) {
      throw ShapeError("field data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(size()));
    }
    for (Real v : data_) {
      if (!std::isfinite(v)) throw ValueError("field data contains a non-finite value");
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return std::size_t(height_) * std::size_t(width_); }
  std::size_t size() const noexcept { return pixels() * std::size_t(channels_); }
  bool empty() const noexcept { return data_.empty(); }

  Real& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  Real at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  std::span<Real> pixel(int y, int x) noexcept {
    return {data_.data() + index(y, x, 0), std::size_t(channels_)};
  }
  std::span<const Real> pixel(int y, int x) const noexcept {
    return {data_.data() + index(y, x, 0), std::size_t(channels_)};
  }

  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }

  std::size_t index(int y, int x, int c) const noexcept {
    return (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * std::size_t(channels_) +
           std::size_t(c);
  }

  template <int OtherChannels>
  bool same_extent(const BasicField<Real, OtherChannels>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const BasicField&) const = default;

 private:
  void check_dims() const {
    if (height_ <= 0 || width_ <= 0 || channels_ <= 0) {
      throw ShapeError("field dimensions must be positive, got " + std::to_string(height_) + "x" +
                       std::to_string(width_) + "x" + std::to_string(channels_));
    }
    if (FixedChannels > 0 && channels_ != FixedChannels) {
      throw ShapeError("field expects " + std::to_string(FixedChannels) + " channels, got " +
                       std::to_string(channels_));
    }
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = FixedChannels;
  std::vector<Real> data_;
};

template <typename Real> using ScalarField = BasicField<Real, 1>;
template <typename Real> using VectorField = BasicField<Real, 2>;
template <typename Real> using ChannelField = BasicField<Real, 0>;

template <typename Real> using ScalarSequence = std::vector<ScalarField<Real>>;
template <typename Real> using VectorSequence = std::vector<VectorField<Real>>;
template <typename Real> using ChannelSequence = std::vector<ChannelField<Real>>;

/// Reinterprets any field as a dynamic-channel field (copy).
template <typename Real, int K>
ChannelField<Real> as_channels(const BasicField<Real, K>& f) {
  return ChannelField<Real>(f.height(), f.width(), f.channels(),
                            std::vector<Real>(f.values().begin(), f.values().end()));
}

/// Narrows a dynamic field to a fixed-channel type; throws on channel mismatch.
template <typename Target, typename Real>
Target field_as(const ChannelField<Real>& f) {
  return Target(f.height(), f.width(), f.channels(),
                std::vector<Real>(f.values().begin(), f.values().end()));
}

/// Converts element precision.
template <typename To, typename From, int K>
BasicField<To, K> field_cast(const BasicField<From, K>& f) {
  std::vector<To> out(f.size());
  std::transform(f.values().begin(), f.values().end(), out.begin(),
                 [](From v) { return static_cast<To>(v); });
  return BasicField<To, K>(f.height(), f.width(), f.channels(), std::move(out));
}

template <typename To, typename From, int K>
std::vector<BasicField<To, K>> sequence_cast(const std::vector<BasicField<From, K>>& seq) {
  std::vector<BasicField<To, K>> out;
  out.reserve(seq.size());
  for (const auto& f : seq) out.push_back(field_cast<To>(f));
  return out;
}

/// Concatenates fields along the channel axis.
template <typename Real, int K>
ChannelField<Real> concat_channels(std::initializer_list<const BasicField<Real, K>*> parts) {
  int h = (*parts.begin())->height();
  int w = (*parts.begin())->width();
  int total = 0;
  for (auto* p : parts) {
    if (p->height() != h || p->width() != w) throw ShapeError("concat: extent mismatch");
    total += p->channels();
  }
  ChannelField<Real> out(h, w, total, Real(0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Real* dst = out.pixel(y, x).data();
      for (auto* p : parts) {
        auto src = p->pixel(y, x);
        std::copy(src.begin(), src.end(), dst);
        dst += src.size();
      }
    }
  }
  return out;
}

/// Copies channels [first, first + count) into a new field.
template <typename Real, int K>
ChannelField<Real> slice_channels(const BasicField<Real, K>& f, int first, int count) {
  if (first < 0 || count <= 0 || first + count > f.channels()) {
    throw ShapeError("slice_channels: channel range out of bounds");
  }
  ChannelField<Real> out(f.height(), f.width(), count, Real(0));
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      auto src = f.pixel(y, x);
      std::copy(src.begin() + first, src.begin() + first + count, out.pixel(y, x).begin());
    }
  }
  return out;
}

template <typename Real, int A, int B>
void require_same_extent(const BasicField<Real, A>& a, const BasicField<Real, B>& b,
                         const char* what) {
  if (!a.same_extent(b)) {
    throw ShapeError(std::string(what) + ": extent mismatch (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  }
}

/// Pinhole stereo rig parameters used for disparity/depth conversion.
struct Calibration {
  double focal_px = 1.0;
  double baseline_m = 1.0;

  void validate() const {
    if (!(focal_px > 0.0) || !(baseline_m > 0.0) || !std::isfinite(focal_px) ||
        !std::isfinite(baseline_m)) {
      throw ValueError("calibration requires focal_px > 0 and baseline_m > 0");
    }
  }

  bool operator==(const Calibration&) const = default;
};

}  // namespace bida
