// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace bida {
namespace {

ScalarField<float> corner_field() {
  // value = 2y + x
  return ScalarField<float>(2, 2, std::vector<float>{0.f, 1.f, 2.f, 3.f});
}

ScalarField<float> ramp_1x8() {
  ScalarField<float> f(1, 8);
  for (int x = 0; x < 8; ++x) f.at(0, x) = float(x);
  return f;
}

TEST(BilinearSample, CornerExamples) {
  const auto f = corner_field();
  EXPECT_EQ(bilinear_sample(f, 0.5f, 0.5f)[0], 1.5f);
  EXPECT_EQ(bilinear_sample(f, 1.f, 0.f)[0], 1.f);
  EXPECT_EQ(bilinear_sample(f, -3.f, 0.f)[0], 0.f);
  EXPECT_EQ(bilinear_sample(f, 7.f, 9.f)[0], 3.f);
}

TEST(BilinearSample, IntegerCoordinatesReturnStoredValues) {
  const auto f = test::random_field<float, 0>(7, 9, 3, 4, -100.0, 100.0);
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      const auto v = bilinear_sample(f, float(x), float(y));
      for (int c = 0; c < 3; ++c) ASSERT_EQ(v[std::size_t(c)], f.at(y, x, c));
    }
}

TEST(WarpByFlow, ZeroFlowIsBitExactIdentity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = test::random_field<float, 0>(13, 17, 5, seed, -1e4, 1e4);
    EXPECT_EQ(warp_by_flow(f, VectorField<float>(13, 17)), f);
  }
}

TEST(WarpByFlow, RampTranslationWithEdgeClamp) {
  const auto out = warp_by_flow(ramp_1x8(), test::constant_flow<float>(1, 8, 1.0, 0.0));
  const float want[] = {1, 2, 3, 4, 5, 6, 7, 7};
  for (int x = 0; x < 8; ++x) EXPECT_EQ(out.at(0, x), want[x]);
}

TEST(WarpByFlow, RejectsMismatchedExtent) {
  EXPECT_THROW(warp_by_flow(ramp_1x8(), VectorField<float>(1, 7)), ShapeError);
}

TEST(WarpByFlow, LinearInField) {
  const auto a = test::random_field<double, 0>(9, 11, 2, 1);
  const auto b = test::random_field<double, 0>(9, 11, 2, 2);
  const auto flow = test::random_field<double, 2>(9, 11, 2, 3, -3.0, 3.0);
  const double ca = 0.7, cb = -1.3;
  ChannelField<double> mix = a;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = ca * a.values()[i] + cb * b.values()[i];
  const auto lhs = warp_by_flow(mix, flow);
  const auto wa = warp_by_flow(a, flow);
  const auto wb = warp_by_flow(b, flow);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    ASSERT_NEAR(lhs.values()[i], ca * wa.values()[i] + cb * wb.values()[i], 1e-6);
  }
}

TEST(WarpByFlow, AdjointSatisfiesInnerProductIdentity) {
  const auto x = test::random_field<double, 0>(8, 10, 3, 5);
  const auto y = test::random_field<double, 0>(8, 10, 3, 6);
  const auto flow = test::random_field<double, 2>(8, 10, 2, 7, -4.0, 4.0);
  const auto wx = warp_by_flow(x, flow);
  const auto aty = warp_by_flow_adjoint(y, flow);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += wx.values()[i] * y.values()[i];
    rhs += x.values()[i] * aty.values()[i];
  }
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(WarpByFlow, ConstantFieldIsFixedPoint) {
  const ChannelField<float> c(6, 6, 2, 0.375f);
  const auto flow = test::random_field<float, 2>(6, 6, 2, 1, -10.0, 10.0);
  EXPECT_EQ(warp_by_flow(c, flow), c);
}

TEST(WarpByDisparity, Examples) {
  const auto ramp = ramp_1x8();
  EXPECT_EQ(warp_by_disparity(ramp, ScalarField<float>(1, 8)), ramp);
  const auto out = warp_by_disparity(ramp, test::constant<float>(1, 8, 1.0));
  const float want[] = {0, 0, 1, 2, 3, 4, 5, 6};
  for (int x = 0; x < 8; ++x) EXPECT_EQ(out.at(0, x), want[x]);
}

TEST(Resample, ConstantFlowAndDisparityScaleValues) {
  const auto f = resample_flow(test::constant_flow<float>(16, 16, 4.0, 2.0), 0.25);
  ASSERT_EQ(f.height(), 4);
  ASSERT_EQ(f.width(), 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(f.at(y, x, 0), 1.f);
      EXPECT_EQ(f.at(y, x, 1), 0.5f);
    }
  const auto d = resample_disparity(test::constant<float>(16, 16, 8.0), 0.25);
  for (float v : d.values()) EXPECT_EQ(v, 2.f);
}

TEST(Resample, UnitScaleIsIdentity) {
  const auto f = test::random_field<float, 2>(5, 7, 2, 3);
  EXPECT_EQ(resample_flow(f, 1.0), f);
  const auto d = test::random_field<float>(5, 7, 1, 4);
  EXPECT_EQ(resample_disparity(d, 1.0), d);
}

TEST(Resample, LinearFlowRoundTripOffBoundary) {
  VectorField<double> f(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      f.at(y, x, 0) = x;
      f.at(y, x, 1) = 0.5 * y - 3.0;
    }
  const auto back = resample_flow(resample_flow(f, 0.5), 2.0);
  ASSERT_EQ(back.height(), 32);
  for (int y = 2; y < 30; ++y)
    for (int x = 2; x < 30; ++x)
      for (int c = 0; c < 2; ++c) ASSERT_NEAR(back.at(y, x, c), f.at(y, x, c), 1e-5) << y << "," << x;
}

TEST(Resample, SmoothDisparityRoundTripInterior) {
  ScalarField<double> d(32, 48);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 48; ++x) d.at(y, x) = 10.0 + 0.25 * x - 0.125 * y;
  const auto back = resample_disparity(resample_disparity(d, 0.5), 2.0);
  for (int y = 2; y < 30; ++y)
    for (int x = 2; x < 46; ++x) ASSERT_NEAR(back.at(y, x), d.at(y, x), 1e-5);
}

TEST(FbOcclusionMask, Examples) {
  const auto ones = fb_occlusion_mask(test::constant_flow<float>(5, 5, 1, 0), test::constant_flow<float>(5, 5, -1, 0));
  for (float v : ones.values()) EXPECT_EQ(v, 1.f);
  const auto zeros = fb_occlusion_mask(test::constant_flow<float>(5, 5, 1, 0), test::constant_flow<float>(5, 5, 1, 0));
  for (float v : zeros.values()) EXPECT_EQ(v, 0.f);
}

TEST(FbOcclusionMask, BinaryOnRandomFlows) {
  const auto a = test::random_field<float, 2>(12, 12, 2, 1, -3.0, 3.0);
  const auto b = test::random_field<float, 2>(12, 12, 2, 2, -3.0, 3.0);
  const auto mask = fb_occlusion_mask(a, b);
  for (float v : mask.values()) EXPECT_TRUE(v == 0.f || v == 1.f);
}

TEST(DisparityToDepth, Examples) {
  EXPECT_EQ(disparity_to_depth(test::constant<double>(2, 2, 1.0), Calibration{1.0, 1.0}).at(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(disparity_to_depth(test::constant<double>(1, 1, 0.0), Calibration{1.0, 1.0}, 1e-3).at(0, 0), 1000.0);
  EXPECT_DOUBLE_EQ(disparity_to_depth(test::constant<double>(1, 1, 2.0), Calibration{100.0, 0.05}).at(0, 0), 2.5);
}

TEST(DisparityToDepth, MonotoneDecreasing) {
  ScalarField<double> d(1, 200);
  for (int x = 0; x < 200; ++x) d.at(0, x) = 0.01 + 0.5 * x;
  const auto D = disparity_to_depth(d, Calibration{500.0, 0.2});
  for (int x = 1; x < 200; ++x) EXPECT_LT(D.at(0, x), D.at(0, x - 1));
}

// Analytic scene oracles.

class SceneWarp : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(SceneWarp, ForwardFlowReproducesPreviousFrameOutsideOcclusion) {
  const auto spec = random_scene_spec(GetParam(), 48, 64, 4);
  const auto b = generate<double>(spec);
  const double bound = 2.0 * texture_gradient_bound(spec) * 0.5;
  for (std::size_t t = 0; t + 1 < b.frames(); ++t) {
    const auto warped = warp_by_flow(b.left[t + 1], b.flows.forward[t]);
    for (int y = 0; y < b.height(); ++y)
      for (int x = 0; x < b.width(); ++x) {
        if (b.visible_next[t].at(y, x) == 0.0) continue;
        for (int c = 0; c < 3; ++c) ASSERT_LE(std::abs(warped.at(y, x, c) - b.left[t].at(y, x, c)), bound);
      }
  }
}

TEST_P(SceneWarp, RightViewWarpedByDisparityMatchesLeft) {
  const auto spec = random_scene_spec(GetParam(), 48, 64, 3);
  const auto b = generate<double>(spec);
  const double bound = 2.0 * texture_gradient_bound(spec) * 0.5;
  std::size_t checked = 0;
  for (std::size_t t = 0; t < b.frames(); ++t) {
    const auto warped = warp_by_disparity(b.right[t], b.disparity_gt[t]);
    for (int y = 0; y < b.height(); ++y)
      for (int x = 0; x < b.width(); ++x) {
        // Both interpolation taps must see the same surface.
        const double xr = x - b.disparity_gt[t].at(y, x);
        if (xr < 0.0 || b.visible_right[t].at(y, x) == 0.0) continue;
        const auto layer = detail::front_layer(spec, x, y, int(t), 0.0);
        const int x0 = int(std::floor(xr));
        const int x1 = std::min(x0 + 1, b.width() - 1);
        if (detail::front_layer(spec, x0, y, int(t), 1.0) != layer ||
            detail::front_layer(spec, x1, y, int(t), 1.0) != layer) {
          continue;
        }
        ++checked;
        for (int c = 0; c < 3; ++c) ASSERT_LE(std::abs(warped.at(y, x, c) - b.left[t].at(y, x, c)), bound);
      }
  }
  EXPECT_GT(checked, b.frames() * std::size_t(b.height() * b.width()) / 2);
}

TEST_P(SceneWarp, FbMaskAgreesWithAnalyticOcclusion) {
  const auto b = generate<float>(random_scene_spec(GetParam(), 48, 64, 5));
  for (std::size_t t = 0; t + 1 < b.frames(); ++t) {
    const auto mask = next_visibility_mask(b.flows, t);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) agree += mask.values()[i] == b.visible_next[t].values()[i];
    EXPECT_GE(double(agree) / double(mask.size()), 0.98) << "transition " << t;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SceneWarp, ::testing::ValuesIn(test::kSceneSeeds));

}  // namespace
}  // namespace bida
