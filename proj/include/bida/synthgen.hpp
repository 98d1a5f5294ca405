// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bida/field.hpp"
#include "bida/random.hpp"
#include "bida/warp.hpp"

namespace bida {

/// Axis-aligned rectangle in layer coordinates (pixel centres at integers;
/// a pixel is covered iff x <= px < x + width and y <= py < y + height).
struct Rect {
  double x = 0, y = 0, width = 0, height = 0;
  bool contains(double px, double py) const {
    return px >= x && px < x + width && py >= y && py < y + height;
  }
};

/// One fronto-parallel layer translating at a constant velocity.
struct LayerSpec {
  double disparity = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  std::optional<Rect> extent;  ///< absent for the background
  std::uint64_t texture_seed = 0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;
  int frames = 5;
  /// Nearest first (disparity non-increasing); the last layer is the
  /// full-frame background.
  std::vector<LayerSpec> layers;
  Calibration calibration{500.0, 0.2};
  double frame_rate = 30.0;

  void validate() const {
    if (height < 1 || width < 1 || frames < 1) throw ValidationError("scene: size and frame count must be >= 1");
    calibration.validate();
    if (layers.empty()) throw ValidationError("scene: a background layer is required");
    if (layers.back().extent) throw ValidationError("scene: the last layer is the background and must not have an extent");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (!(l.disparity >= 0.0) || !std::isfinite(l.disparity)) {
        throw ValidationError("scene: layer " + std::to_string(i) + " has a negative disparity");
      }
      if (!std::isfinite(l.vx) || !std::isfinite(l.vy)) throw ValidationError("scene: non-finite velocity");
      if (i > 0 && l.disparity > layers[i - 1].disparity) {
        throw ValidationError("scene: layers must be sorted by disparity, nearest first");
      }
      if (i + 1 < layers.size()) {
        if (!l.extent) throw ValidationError("scene: foreground layer " + std::to_string(i) + " needs an extent");
        const Rect& r = *l.extent;
        if (!(r.width > 0 && r.height > 0)) throw ValidationError("scene: empty layer extent");
        for (int t : {0, frames - 1}) {
          const double x0 = r.x + l.vx * t;
          const double y0 = r.y + l.vy * t;
          if (x0 < 0 || y0 < 0 || x0 + r.width > width || y0 + r.height > height) {
            throw ValidationError("scene: layer " + std::to_string(i) + " leaves the frame by frame " +
                                  std::to_string(t));
          }
        }
      }
    }
  }
};

/// Band-limited procedural texture: 4 random-phase sinusoids per layer.
class Texture {
 public:
  static constexpr int kWaves = 4;
  static constexpr double kAmplitude = 0.12;

  explicit Texture(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& w : waves_) {
      const double wavelength = rng.uniform(6.0, 16.0);
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double k = 2.0 * std::numbers::pi / wavelength;
      w.kx = k * std::cos(angle);
      w.ky = k * std::sin(angle);
      for (auto& p : w.phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
  }

  double value(double x, double y, int channel) const {
    double v = 0.5;
    for (const auto& w : waves_) v += kAmplitude * std::sin(w.kx * x + w.ky * y + w.phase[std::size_t(channel)]);
    return v;
  }

  /// Upper bound on |grad value| (Lipschitz constant, px^-1).
  double gradient_bound() const {
    double g = 0.0;
    for (const auto& w : waves_) g += kAmplitude * std::hypot(w.kx, w.ky);
    return g;
  }

 private:
  struct Wave {
    double kx = 0, ky = 0;
    std::array<double, 3> phase{};
  };
  std::array<Wave, kWaves> waves_;
};

/// A stereo clip with every ground-truth product.
template <typename Real>
struct SequenceBundle {
  std::string clip_id;
  Calibration calibration;
  double frame_rate = 30.0;
  ChannelSequence<Real> left;
  ChannelSequence<Real> right;
  ClipFlows<Real> flows;
  ScalarSequence<Real> disparity_gt;
  /// Named predicted disparity sequences (e.g. "noisy").
  std::map<std::string, ScalarSequence<Real>> predictions;
  /// visible_next[t]: frame-t pixels visible in t+1 (T-1 entries, frame t grid).
  ScalarSequence<Real> visible_next;
  /// visible_prev[t]: frame-(t+1) pixels visible in t (T-1 entries, frame t+1 grid).
  ScalarSequence<Real> visible_prev;
  /// Left pixels visible in the right view.
  ScalarSequence<Real> visible_right;

  std::size_t frames() const noexcept { return left.size(); }
  int height() const { return left.at(0).height(); }
  int width() const { return left.at(0).width(); }

  bool operator==(const SequenceBundle&) const = default;
};

namespace detail {
/// Index of the front layer covering layer-space point (x, y) seen from a view
/// whose horizontal offset for layer i is `shift * disparity_i`.
inline std::size_t front_layer(const SceneSpec& spec, double x, double y, int t, double shift) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (!l.extent) return i;
    const double lx = x + shift * l.disparity - l.vx * t;
    const double ly = y - l.vy * t;
    if (l.extent->contains(lx, ly)) return i;
  }
  return spec.layers.size() - 1;
}

inline bool inside(const SceneSpec& spec, double x, double y) {
  return x >= 0 && y >= 0 && x <= spec.width - 1 && y <= spec.height - 1;
}
}  // namespace detail

/// Renders the clip.  The right view is rendered from the same textures
/// shifted by each layer's disparity, never by warping the left view.
template <typename Real = float>
SequenceBundle<Real> generate(const SceneSpec& spec) {
  spec.validate();
  const int H = spec.height;
  const int W = spec.width;
  const int T = spec.frames;
  std::vector<Texture> textures;
  for (const auto& l : spec.layers) textures.emplace_back(mix_seed(spec.seed, l.texture_seed));

  SequenceBundle<Real> b;
  b.clip_id = "synth-" + std::to_string(spec.seed);
  b.calibration = spec.calibration;
  b.frame_rate = spec.frame_rate;

  auto render = [&](int t, double shift) {
    ChannelField<Real> img(H, W, 3, Real(0));
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const auto i = detail::front_layer(spec, x, y, t, shift);
        const auto& l = spec.layers[i];
        const double lx = x + shift * l.disparity - l.vx * t;
        const double ly = y - l.vy * t;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = Real(textures[i].value(lx, ly, c));
      }
    return img;
  };

  for (int t = 0; t < T; ++t) {
    b.left.push_back(render(t, 0.0));
    b.right.push_back(render(t, 1.0));
    ScalarField<Real> disp(H, W, Real(0));
    ScalarField<Real> stereo(H, W, Real(0));
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const auto i = detail::front_layer(spec, x, y, t, 0.0);
        const double d = spec.layers[i].disparity;
        disp.at(y, x) = Real(d);
        // Left pixel x shows up at x - d in the right view.
        const double xr = x - d;
        stereo.at(y, x) = detail::inside(spec, xr, y) && detail::front_layer(spec, xr, y, t, 1.0) == i
                              ? Real(1) : Real(0);
      }
    b.disparity_gt.push_back(std::move(disp));
    b.visible_right.push_back(std::move(stereo));
  }

  for (int t = 0; t + 1 < T; ++t) {
    VectorField<Real> fwd(H, W), bwd(H, W);
    ScalarField<Real> vis_next(H, W, Real(0)), vis_prev(H, W, Real(0));
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const auto i = detail::front_layer(spec, x, y, t, 0.0);
        const auto& l = spec.layers[i];
        fwd.at(y, x, 0) = Real(l.vx);
        fwd.at(y, x, 1) = Real(l.vy);
        const double nx = x + l.vx, ny = y + l.vy;
        vis_next.at(y, x) =
            detail::inside(spec, nx, ny) && detail::front_layer(spec, nx, ny, t + 1, 0.0) == i ? Real(1) : Real(0);

        const auto j = detail::front_layer(spec, x, y, t + 1, 0.0);
        const auto& m = spec.layers[j];
        bwd.at(y, x, 0) = Real(-m.vx);
        bwd.at(y, x, 1) = Real(-m.vy);
        const double px = x - m.vx, py = y - m.vy;
        vis_prev.at(y, x) =
            detail::inside(spec, px, py) && detail::front_layer(spec, px, py, t, 0.0) == j ? Real(1) : Real(0);
      }
    b.flows.forward.push_back(std::move(fwd));
    b.flows.backward.push_back(std::move(bwd));
    b.visible_next.push_back(std::move(vis_next));
    b.visible_prev.push_back(std::move(vis_prev));
  }
  return b;
}

/// Lipschitz bound of the textures used by `spec` (max over layers).
inline double texture_gradient_bound(const SceneSpec& spec) {
  double g = 0.0;
  for (const auto& l : spec.layers) g = std::max(g, Texture(mix_seed(spec.seed, l.texture_seed)).gradient_bound());
  return g;
}

/// Adds i.i.d. N(0, sigma^2) noise to the ground-truth disparities and stores
/// the result under `key`.
template <typename Real>
void perturb(SequenceBundle<Real>& bundle, double sigma, std::uint64_t seed, const std::string& key = "noisy") {
  if (!(sigma >= 0.0)) throw ValueError("perturb: sigma must be >= 0");
  ScalarSequence<Real> noisy;
  for (std::size_t t = 0; t < bundle.disparity_gt.size(); ++t) {
    Rng rng(mix_seed(seed, t));
    ScalarField<Real> d = bundle.disparity_gt[t];
    if (sigma > 0.0) {
      for (auto& v : d.values()) v = Real(double(v) + rng.normal(0.0, sigma));
    }
    noisy.push_back(std::move(d));
  }
  bundle.predictions[key] = std::move(noisy);
}

/// A random layered scene with integer velocities and quarter-pixel layer
/// disparities: warps of the ground truth are exact and disparity offsets of
/// a few pixels are exactly representable.
inline SceneSpec random_scene_spec(std::uint64_t seed, int height, int width, int frames, int foreground = 2) {
  Rng rng(mix_seed(seed, 0xB1DA));
  SceneSpec s;
  s.seed = seed;
  s.height = height;
  s.width = width;
  s.frames = frames;
  const double bg_disp = 0.25 * double(rng.integer(8, 24));
  std::vector<LayerSpec> fg;
  for (int i = 0; i < foreground; ++i) {
    LayerSpec l;
    l.disparity = bg_disp + 0.25 * double(rng.integer(8, 40));
    l.vx = double(rng.integer(-2, 2));
    l.vy = double(rng.integer(-1, 1));
    const double w = std::max(4.0, std::floor(width * rng.uniform(0.2, 0.35)));
    const double h = std::max(4.0, std::floor(height * rng.uniform(0.2, 0.35)));
    const double travel_x = std::abs(l.vx) * (frames - 1);
    const double travel_y = std::abs(l.vy) * (frames - 1);
    const double max_x = width - w - travel_x;
    const double max_y = height - h - travel_y;
    if (max_x < 0 || max_y < 0) {
      l.vx = l.vy = 0.0;
    }
    const double lo_x = l.vx < 0 ? travel_x : 0.0;
    const double lo_y = l.vy < 0 ? travel_y : 0.0;
    const double x = lo_x + std::floor(rng.uniform(0.0, std::max(0.0, width - w - travel_x)));
    const double y = lo_y + std::floor(rng.uniform(0.0, std::max(0.0, height - h - travel_y)));
    l.extent = Rect{x, y, w, h};
    l.texture_seed = std::uint64_t(i + 1);
    fg.push_back(l);
  }
  std::sort(fg.begin(), fg.end(), [](const LayerSpec& a, const LayerSpec& b) { return a.disparity > b.disparity; });
  s.layers = fg;
  LayerSpec bg;
  bg.disparity = bg_disp;
  bg.vx = double(rng.integer(-1, 1));
  bg.texture_seed = 0;
  s.layers.push_back(bg);
  return s;
}

}  // namespace bida
