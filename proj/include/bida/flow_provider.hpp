// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "bida/field.hpp"
#include "bida/warp.hpp"

namespace bida {

/// Which pair a flow request refers to: transition t -> t+1 of the
/// prediction or of the ground truth.
struct FlowQuery {
  std::size_t transition = 0;
  bool ground_truth = false;
};

/// Estimates motion between two depth maps rendered as images.
template <typename Real>
class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  /// Flow on `a` pointing into `b`.
  virtual VectorField<Real> flow(const ScalarField<Real>& a, const ScalarField<Real>& b, FlowQuery q) const = 0;
  virtual std::string name() const = 0;
};

/// Deterministic coarse-to-fine block matching (integer displacements,
/// sum of absolute differences, ties resolved towards the predicted
/// displacement and then in scan order).
template <typename Real>
class BlockMatchingFlow final : public FlowProvider<Real> {
 public:
  struct Options {
    int radius = 2;      ///< search radius per level (px at that level)
    int half_block = 2;  ///< 5x5 blocks
    int levels = 3;
    int min_extent = 16;  ///< coarsest level keeps both dims >= this
  };

  BlockMatchingFlow() = default;
  explicit BlockMatchingFlow(Options o) : opt_(o) {}

  std::string name() const override { return "block-matching"; }

  VectorField<Real> flow(const ScalarField<Real>& a, const ScalarField<Real>& b, FlowQuery) const override {
    require_same_extent(a, b, "block matching flow");
    // Pyramid sizes, finest first.
    std::vector<std::pair<int, int>> sizes{{a.height(), a.width()}};
    while (int(sizes.size()) < opt_.levels) {
      const auto [h, w] = sizes.back();
      if (h / 2 < opt_.min_extent || w / 2 < opt_.min_extent) break;
      sizes.emplace_back(h / 2, w / 2);
    }
    VectorField<Real> current;
    for (std::size_t l = sizes.size(); l-- > 0;) {
      const auto [h, w] = sizes[l];
      const auto la = resize_bilinear(a, h, w);
      const auto lb = resize_bilinear(b, h, w);
      VectorField<Real> guess(h, w);
      if (!current.empty()) {
        const auto up = resize_flow(current, h, w);
        for (std::size_t i = 0; i < guess.size(); ++i) guess.values()[i] = std::round(up.values()[i]);
      }
      current = match(la, lb, guess);
    }
    return current;
  }

 private:
  VectorField<Real> match(const ScalarField<Real>& a, const ScalarField<Real>& b,
                          const VectorField<Real>& guess) const {
    const int h = a.height();
    const int w = a.width();
    const int r = opt_.radius;
    const int k = opt_.half_block;
    auto clamped = [](const ScalarField<Real>& f, int y, int x) {
      return double(f.at(std::clamp(y, 0, f.height() - 1), std::clamp(x, 0, f.width() - 1)));
    };
    VectorField<Real> out(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int gu = int(guess.at(y, x, 0));
        const int gv = int(guess.at(y, x, 1));
        double best = std::numeric_limits<double>::infinity();
        int bu = gu, bv = gv;
        auto cost = [&](int u, int v) {
          double s = 0.0;
          for (int dy = -k; dy <= k; ++dy)
            for (int dx = -k; dx <= k; ++dx)
              s += std::abs(clamped(a, y + dy, x + dx) - clamped(b, y + dy + v, x + dx + u));
          return s;
        };
        best = cost(gu, gv);
        for (int v = gv - r; v <= gv + r; ++v)
          for (int u = gu - r; u <= gu + r; ++u) {
            if (u == gu && v == gv) continue;
            const double c = cost(u, v);
            if (c < best) {
              best = c;
              bu = u;
              bv = v;
            }
          }
        out.at(y, x, 0) = Real(bu);
        out.at(y, x, 1) = Real(bv);
      }
    }
    return out;
  }

  Options opt_;
};

/// Serves flows computed elsewhere (e.g. by an external estimator).
template <typename Real>
class PrecomputedFlow final : public FlowProvider<Real> {
 public:
  PrecomputedFlow(VectorSequence<Real> prediction, VectorSequence<Real> ground_truth)
      : pred_(std::move(prediction)), gt_(std::move(ground_truth)) {}

  std::string name() const override { return "precomputed"; }

  VectorField<Real> flow(const ScalarField<Real>& a, const ScalarField<Real>&, FlowQuery q) const override {
    const auto& seq = q.ground_truth ? gt_ : pred_;
    if (q.transition >= seq.size()) {
      throw ValidationError("precomputed flow: no flow for transition " + std::to_string(q.transition));
    }
    require_same_extent(a, seq[q.transition], "precomputed flow");
    return seq[q.transition];
  }

 private:
  VectorSequence<Real> pred_;
  VectorSequence<Real> gt_;
};

}  // namespace bida
