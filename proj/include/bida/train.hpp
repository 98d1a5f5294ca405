// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bida/losses.hpp"
#include "bida/stabilizer.hpp"

namespace bida {

enum class Optimizer { sgd, adamw };

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adamw") return Optimizer::adamw;
  throw ValidationError("unknown optimizer '" + s + "' (sgd|adamw)");
}

struct TrainOptions {
  int steps = 500;
  double lr = 2e-3;
  double lambda = 0.2;
  Optimizer optimizer = Optimizer::sgd;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;  ///< decoupled, AdamW only
  std::uint64_t seed = 0;      ///< weight initialisation

  void validate() const {
    if (steps < 0) throw ValidationError("train: steps must be >= 0");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("train: lr must be > 0");
    if (!(lambda >= 0.0)) throw ValidationError("train: lambda must be >= 0");
  }
};

struct LossPoint {
  int step = 0;
  double spatial = 0.0;
  double temporal = 0.0;
  double total = 0.0;
};

template <typename Real>
struct TrainResult {
  WeightBank<Real> weights;
  std::vector<LossPoint> curve;  ///< steps + 1 entries; entry k is the loss before update k
};

/// total_loss of the stabilizer output and its gradient with respect to
/// every weight.
template <typename Real>
LossPoint stabilizer_loss(const ScalarSequence<Real>& noisy, const ScalarSequence<Real>& gt, const ClipFlows<Real>& flows,
                          const TemporalMasks<Real>& masks, const WeightBank<Real>& weights,
                          const StabilizerConfig& cfg, double lambda, WeightBank<Real>* grad = nullptr) {
  StabilizerTape<Real> tape;
  const auto out = stabilize(noisy, flows, weights, cfg, grad ? &tape : nullptr);
  LossPoint p;
  p.spatial = spatial_loss(out.corrected, gt);
  p.temporal = temporal_loss(out.corrected, flows, masks);
  p.total = total_loss(p.spatial, p.temporal, lambda);
  if (!std::isfinite(p.total)) throw NumericError("training loss is not finite");
  if (grad) {
    auto g = spatial_loss_gradient(out.corrected, gt);
    const auto gt_grad = temporal_loss_gradient(out.corrected, flows, masks);
    for (std::size_t t = 0; t < g.size(); ++t) {
      auto gv = g[t].values();
      auto tv = gt_grad[t].values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += Real(lambda) * tv[i];
    }
    *grad = stabilize_backward(tape, g, weights, cfg);
  }
  return p;
}

/// Fits the stabilizer to one clip by full-batch gradient descent.
template <typename Real>
TrainResult<Real> train_stabilizer(const ScalarSequence<Real>& noisy, const ScalarSequence<Real>& gt,
                                   const ClipFlows<Real>& flows, const StabilizerConfig& cfg, const TrainOptions& opt,
                                   const std::function<void(const LossPoint&)>& on_step = {}) {
  opt.validate();
  if (noisy.size() != gt.size()) throw ShapeError("train: prediction/ground-truth frame count mismatch");
  TrainResult<Real> r;
  r.weights = init_stabilizer_weights<Real>(cfg, opt.seed);
  const auto masks = temporal_masks(flows, noisy.size());

  WeightBank<Real> m = r.weights.zeros_like();
  WeightBank<Real> v = r.weights.zeros_like();
  for (int step = 0; step <= opt.steps; ++step) {
    WeightBank<Real> grad;
    const bool update = step < opt.steps;
    auto p = stabilizer_loss(noisy, gt, flows, masks, r.weights, cfg, opt.lambda, update ? &grad : nullptr);
    p.step = step;
    r.curve.push_back(p);
    if (on_step) on_step(p);
    if (!update) break;

    if (opt.optimizer == Optimizer::sgd) {
      for (auto& [name, t] : r.weights.tensors()) {
        const auto& g = grad.get(name).values;
        for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] -= Real(opt.lr) * g[i];
      }
    } else {
      const double k = step + 1;
      const double c1 = 1.0 - std::pow(opt.beta1, k);
      const double c2 = 1.0 - std::pow(opt.beta2, k);
      for (auto& [name, t] : r.weights.tensors()) {
        const auto& g = grad.get(name).values;
        auto& mv = m.get(name).values;
        auto& vv = v.get(name).values;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
          mv[i] = Real(opt.beta1 * mv[i] + (1.0 - opt.beta1) * g[i]);
          vv[i] = Real(opt.beta2 * vv[i] + (1.0 - opt.beta2) * double(g[i]) * g[i]);
          const double mhat = mv[i] / c1;
          const double vhat = vv[i] / c2;
          const double w = t.values[i];
          t.values[i] = Real(w - opt.lr * (mhat / (std::sqrt(vhat) + opt.eps) + opt.weight_decay * w));
        }
      }
    }
  }
  return r;
}

}  // namespace bida
