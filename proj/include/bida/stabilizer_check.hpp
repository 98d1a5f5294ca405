// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "bida/gradcheck.hpp"
#include "bida/stabilizer.hpp"
#include "bida/synthgen.hpp"

namespace bida {

struct StabilizerCheckOptions {
  int height = 32;
  int width = 64;
  int frames = 5;
  double noise_sigma = 0.5;
  StabilizerConfig config{};
  GradcheckOptions gradcheck{};
};

/// Finite-difference check of stabilize_backward in double precision on a
/// generated clip.  The probe loss is <G, residual> for a fixed random G;
/// every layer, including the head, starts from random weights.
inline GradcheckReport check_stabilizer_gradients(std::uint64_t seed, const StabilizerCheckOptions& o = {}) {
  auto bundle = generate<double>(random_scene_spec(seed, o.height, o.width, o.frames));
  perturb(bundle, o.noise_sigma, mix_seed(seed, 1));
  const auto& d = bundle.predictions.at("noisy");

  Rng rng(mix_seed(seed, 2));
  ScalarSequence<double> probe;
  for (std::size_t t = 0; t < d.size(); ++t) {
    ScalarField<double> g(o.height, o.width, 0.0);
    for (auto& v : g.values()) v = rng.normal();
    probe.push_back(std::move(g));
  }
  auto loss = [&](const WeightBank<double>& w) {
    const auto out = stabilize(d, bundle.flows, w, o.config);
    double acc = 0.0;
    for (std::size_t t = 0; t < d.size(); ++t) {
      auto r = out.residual[t].values();
      auto g = probe[t].values();
      for (std::size_t i = 0; i < r.size(); ++i) acc += g[i] * r[i];
    }
    return acc;
  };

  auto weights = init_stabilizer_weights<double>(o.config, mix_seed(seed, 3), false);
  for (auto& [name, t] : weights.tensors()) {
    if (name.ends_with(".bias")) {
      for (auto& v : t.values) v = rng.normal(0.0, 0.1);
    }
  }
  StabilizerTape<double> tape;
  stabilize(d, bundle.flows, weights, o.config, &tape);
  const auto analytic = stabilize_backward(tape, probe, weights, o.config);
  auto opts = o.gradcheck;
  opts.seed = mix_seed(seed, 4);
  return gradcheck(weights, loss, analytic, opts);
}

}  // namespace bida
