// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace bida {
namespace {

SceneSpec background_only() {
  SceneSpec s;
  s.seed = 9;
  s.height = 24;
  s.width = 32;
  s.frames = 4;
  LayerSpec bg;
  bg.disparity = 6.5;
  s.layers = {bg};
  return s;
}

SceneSpec two_layers(int rect_h) {
  SceneSpec s;
  s.seed = 3;
  s.height = 64;
  s.width = 64;
  s.frames = 5;
  LayerSpec fg;
  fg.disparity = 12.0;
  fg.vx = 2.0;
  fg.extent = Rect{20, 16, 20, double(rect_h)};
  fg.texture_seed = 1;
  LayerSpec bg;
  bg.disparity = 4.0;
  s.layers = {fg, bg};
  return s;
}

TEST(Generate, StaticBackground) {
  const auto b = generate<float>(background_only());
  ASSERT_EQ(b.frames(), 4u);
  for (std::size_t t = 0; t < b.frames(); ++t) {
    for (float v : b.disparity_gt[t].values()) ASSERT_EQ(v, 6.5f);
    if (t + 1 < b.frames()) {
      for (float v : b.flows.forward[t].values()) ASSERT_EQ(v, 0.f);
      for (float v : b.flows.backward[t].values()) ASSERT_EQ(v, 0.f);
      for (float v : b.visible_next[t].values()) ASSERT_EQ(v, 1.f);
      for (float v : b.visible_prev[t].values()) ASSERT_EQ(v, 1.f);
      EXPECT_EQ(b.left[t], b.left[t + 1]);
    }
  }
}

TEST(Generate, OccludedCountIsCoveredStrip) {
  for (int rect_h : {8, 24, 33}) {
    const auto b = generate<float>(two_layers(rect_h));
    for (std::size_t t = 0; t + 1 < b.frames(); ++t) {
      std::size_t occluded_next = 0, occluded_prev = 0;
      for (float v : b.visible_next[t].values()) occluded_next += v == 0.f;
      for (float v : b.visible_prev[t].values()) occluded_prev += v == 0.f;
      EXPECT_EQ(occluded_next, std::size_t(2 * rect_h)) << "transition " << t;
      EXPECT_EQ(occluded_prev, std::size_t(2 * rect_h)) << "transition " << t;
    }
  }
}

TEST(Generate, FlowsFollowFrontLayer) {
  const auto b = generate<float>(two_layers(24));
  for (std::size_t t = 0; t + 1 < b.frames(); ++t) {
    const int x0 = 20 + 2 * int(t);
    EXPECT_EQ(b.flows.forward[t].at(30, x0, 0), 2.f);
    EXPECT_EQ(b.flows.forward[t].at(30, x0 - 1, 0), 0.f);
    EXPECT_EQ(b.flows.backward[t].at(30, x0 + 2, 0), -2.f);
    EXPECT_EQ(b.disparity_gt[t].at(30, x0), 12.f);
    EXPECT_EQ(b.disparity_gt[t].at(30, x0 - 1), 4.f);
  }
}

TEST(Generate, RightViewNeverWarped) {
  // The right view of a textured layer sampled at x - d equals the left view
  // sampled at x exactly for integer disparities.
  const auto b = generate<double>(background_only());
  auto s = background_only();
  s.layers[0].disparity = 3.0;
  const auto c = generate<double>(s);
  for (int y = 0; y < c.height(); ++y)
    for (int x = 3; x < c.width(); ++x)
      for (int k = 0; k < 3; ++k) ASSERT_EQ(c.right[0].at(y, x - 3, k), c.left[0].at(y, x, k));
  EXPECT_EQ(b.left[0], c.left[0]);
}

TEST(Generate, Deterministic) {
  const auto spec = random_scene_spec(42, 40, 56, 4);
  EXPECT_EQ(generate<float>(spec), generate<float>(spec));
  EXPECT_NE(generate<float>(random_scene_spec(43, 40, 56, 4)).left[0], generate<float>(spec).left[0]);
}

TEST(Generate, ImagesInUnitRange) {
  const auto b = generate<float>(random_scene_spec(5, 48, 64, 3));
  for (const auto& img : b.left)
    for (float v : img.values()) {
      ASSERT_GE(v, 0.f);
      ASSERT_LE(v, 1.f);
    }
}

TEST(Validate, RejectsBrokenSpecs) {
  auto s = two_layers(8);
  s.layers.pop_back();
  EXPECT_THROW(generate<float>(s), ValidationError);

  s = two_layers(8);
  s.layers[0].disparity = 1.0;
  EXPECT_THROW(generate<float>(s), ValidationError);

  s = two_layers(8);
  s.layers[1].disparity = -1.0;
  s.layers[0].disparity = -0.5;
  EXPECT_THROW(generate<float>(s), ValidationError);

  s = two_layers(8);
  s.layers[0].vx = 10.0;
  EXPECT_THROW(generate<float>(s), ValidationError);

  s = two_layers(8);
  s.layers[0].extent.reset();
  EXPECT_THROW(generate<float>(s), ValidationError);

  s = two_layers(8);
  s.frames = 0;
  EXPECT_THROW(generate<float>(s), ValidationError);

  s = background_only();
  s.calibration.focal_px = -1.0;
  EXPECT_THROW(generate<float>(s), ValueError);
}

TEST(RandomSceneSpec, ValidAcrossSeedsAndSizes) {
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    for (int T : {1, 5, 10}) EXPECT_NO_THROW(random_scene_spec(seed, 64, 64, T).validate()) << seed;
}

TEST(Perturb, ZeroSigmaIsBitIdentical) {
  auto b = generate<float>(random_scene_spec(2, 32, 32, 3));
  perturb(b, 0.0, 5);
  for (std::size_t t = 0; t < b.frames(); ++t) EXPECT_EQ(b.predictions.at("noisy")[t], b.disparity_gt[t]);
}

TEST(Perturb, NoiseStatistics) {
  auto b = generate<double>(random_scene_spec(11, 64, 64, 10));
  perturb(b, 0.5, 11);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < b.frames(); ++t)
    for (std::size_t i = 0; i < b.disparity_gt[t].size(); ++i, ++n) {
      const double e = b.predictions.at("noisy")[t].values()[i] - b.disparity_gt[t].values()[i];
      sum += e;
      sq += e * e;
    }
  const double mean = sum / double(n);
  const double sd = std::sqrt(sq / double(n) - mean * mean);
  EXPECT_NEAR(sd, 0.5, 0.05);
  const double e = epe(b.predictions.at("noisy"), b.disparity_gt);
  EXPECT_NEAR(e, 0.5 * std::sqrt(2.0 / M_PI), 0.05 * 0.5 * std::sqrt(2.0 / M_PI));
}

TEST(Perturb, DeterministicAndFrameIndependent) {
  auto a = generate<float>(random_scene_spec(2, 32, 32, 3));
  auto b = a;
  perturb(a, 0.7, 99);
  perturb(b, 0.7, 99);
  EXPECT_EQ(a.predictions, b.predictions);
  perturb(b, 0.7, 100);
  EXPECT_NE(a.predictions, b.predictions);
  const auto& n = a.predictions.at("noisy");
  double e0 = 0.0, e1 = 0.0;
  for (std::size_t i = 0; i < n[0].size(); ++i) {
    e0 += n[0].values()[i] - a.disparity_gt[0].values()[i];
    e1 += n[1].values()[i] - a.disparity_gt[1].values()[i];
  }
  EXPECT_NE(e0, e1);
}

TEST(Perturb, RejectsNegativeSigma) {
  auto b = generate<float>(background_only());
  EXPECT_THROW(perturb(b, -0.1, 1), ValueError);
  EXPECT_THROW(perturb(b, std::nan(""), 1), ValueError);
}

}  // namespace
}  // namespace bida
