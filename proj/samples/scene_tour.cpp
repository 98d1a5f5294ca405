// SPDX-License-Identifier: Apache-2.0
// Renders a random layered clip, corrupts its disparities with noise of
// growing strength and prints how each temporal metric reacts.
//
//   scene_tour [seed]

#include <cstdio>
#include <cstdlib>

#include "bida/bida.hpp"

int main(int argc, char** argv) {
  using namespace bida;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

  auto clip = generate<float>(random_scene_spec(seed, 64, 64, 6));
  std::printf("clip %s: %zu frames, %dx%d\n", clip.clip_id.c_str(), clip.frames(), clip.height(), clip.width());

  const BlockMatchingFlow<float> provider;
  for (double sigma : {0.0, 0.1, 0.5, 1.0}) {
    perturb(clip, sigma, seed + 100);
    ClipEvaluationInput<float> in;
    in.clip_id = clip.clip_id;
    in.calibration = clip.calibration;
    in.left = clip.left;
    in.flows = clip.flows;
    in.disparity_gt = clip.disparity_gt;
    in.disparity_pred = clip.predictions.at("noisy");
    const auto report = evaluate_clip(in, provider);
    std::printf("sigma %.1f  EPE %.4f  TEPE %.4f  OPW %.4f  RTC %.4f  TCC %.4f  TCM %.4f\n", sigma,
                report.scalars.at("EPE"), report.scalars.at("TEPE"), report.scalars.at("OPW"),
                report.scalars.at("RTC"), report.scalars.at("TCC"), report.scalars.at("TCM"));
  }
}
