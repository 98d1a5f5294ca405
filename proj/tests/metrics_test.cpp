// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace bida {
namespace {

using Seq = ScalarSequence<double>;

Seq constant_seq(std::initializer_list<double> values, int h = 12, int w = 12) {
  Seq s;
  for (double v : values) s.push_back(test::constant<double>(h, w, v));
  return s;
}

ChannelSequence<double> gray_images(std::initializer_list<double> values, int h = 12, int w = 12) {
  ChannelSequence<double> s;
  for (double v : values) s.push_back(ChannelField<double>(h, w, 3, v));
  return s;
}

TEST(Epe, Examples) {
  const auto gt = test::random_field<double>(6, 8, 1, 1, 0.0, 20.0);
  EXPECT_EQ(epe(gt, gt), 0.0);
  EXPECT_EQ(bad_rate(gt, gt, 1.0), 0.0);
  auto d = gt;
  for (auto& v : d.values()) v += 2.0;
  EXPECT_NEAR(epe(d, gt), 2.0, 1e-12);
  EXPECT_EQ(bad_rate(d, gt, 1.0), 100.0);
  EXPECT_EQ(bad_rate(d, gt, 3.0), 0.0);

  ScalarField<double> half(2, 2, std::vector<double>{0, 4, 0, 4});
  const ScalarField<double> zero(2, 2);
  EXPECT_EQ(epe(half, zero), 2.0);
  EXPECT_EQ(bad_rate(half, zero, 3.0), 50.0);
}

TEST(Epe, StrictThreshold) {
  const ScalarField<double> d(1, 2, std::vector<double>{1.0, 3.0});
  EXPECT_EQ(bad_rate(d, ScalarField<double>(1, 2), 1.0), 50.0);
  EXPECT_EQ(bad_rate(d, ScalarField<double>(1, 2), 3.0), 0.0);
}

TEST(Epe, ValidMaskAndEmptySet) {
  const ScalarField<double> d(1, 2, std::vector<double>{1.0, 9.0});
  const ScalarField<double> gt(1, 2);
  const ScalarField<double> mask(1, 2, std::vector<double>{1.0, 0.0});
  EXPECT_EQ(epe(d, gt, &mask), 1.0);
  const ScalarField<double> none(1, 2);
  EXPECT_THROW(epe(d, gt, &none), ValueError);
  EXPECT_THROW(bad_rate(d, gt, 1.0, &none), ValueError);
}

TEST(Tepe, Examples) {
  const auto gt = constant_seq({1.0, 2.0, 4.0, 3.0});
  EXPECT_EQ(tepe(gt, gt), 0.0);
  auto biased = gt;
  for (auto& f : biased)
    for (auto& v : f.values()) v += 3.0;
  EXPECT_EQ(tepe(biased, gt), 0.0);
  EXPECT_EQ(temporal_bad_rate(biased, gt, 1.0), 0.0);
  EXPECT_EQ(epe(biased, gt), 3.0);
  EXPECT_THROW(tepe(constant_seq({1.0}), constant_seq({1.0})), ShapeError);
}

double brute_force_tepe(const Seq& d, const Seq& gt) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t + 1 < d.size(); ++t) {
    double frame = 0.0;
    for (int y = 0; y < d[t].height(); ++y)
      for (int x = 0; x < d[t].width(); ++x)
        frame += std::abs((d[t].at(y, x) - d[t + 1].at(y, x)) - (gt[t].at(y, x) - gt[t + 1].at(y, x)));
    sum += frame / double(d[t].pixels());
    ++n;
  }
  return sum / double(n);
}

TEST(Tepe, SingleFrameShiftHandCase) {
  for (std::size_t T : {3u, 5u, 8u}) {
    Seq gt;
    for (std::size_t t = 0; t < T; ++t) gt.push_back(test::random_field<double>(9, 7, 1, t, 0.0, 30.0));
    for (std::size_t k = 1; k + 1 < T; ++k) {
      auto d = gt;
      for (auto& v : d[k].values()) v += 1.0;
      const double want = 2.0 / double(T - 1);
      EXPECT_NEAR(tepe(d, gt), want, 1e-9);
      EXPECT_NEAR(brute_force_tepe(d, gt), want, 1e-9);
      EXPECT_NEAR(tepe(d, gt), brute_force_tepe(d, gt), 1e-12);
    }
  }
}

TEST(Tepe, PerTransitionLength) {
  const auto gt = constant_seq({1.0, 2.0, 4.0, 3.0, 0.0});
  EXPECT_EQ(tepe_per_transition(gt, gt).size(), 4u);
}

TEST(PhotometricMask, GateValues) {
  const ChannelField<double> a(2, 2, 3, 0.5);
  auto m = photometric_mask(a, a);
  for (double v : m.values()) EXPECT_EQ(v, 1.0);
  const ChannelField<double> b(2, 2, 3, 0.6);
  m = photometric_mask(b, a);
  for (double v : m.values()) EXPECT_NEAR(v, std::exp(-5.0), 1e-12);
  m = photometric_mask(a, b);
  for (double v : m.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Opw, Examples) {
  const auto flows = test::zero_flows<double>(2, 12, 12);
  EXPECT_EQ(opw(constant_seq({5.0, 5.0}), gray_images({0.5, 0.5}), flows).value, 0.0);
  EXPECT_NEAR(opw(constant_seq({5.0, 5.75}), gray_images({0.5, 0.5}), flows).value, 0.75, 1e-12);
  EXPECT_NEAR(opw(constant_seq({5.0, 5.75}), gray_images({0.3, 0.4}), flows).value, std::exp(-5.0) * 0.75, 1e-12);
}

TEST(Opw, RangeRestriction) {
  const auto flows = test::zero_flows<double>(2, 1, 2);
  Seq depth{ScalarField<double>(1, 2, std::vector<double>{10.0, 60.0}),
            ScalarField<double>(1, 2, std::vector<double>{11.0, 64.0})};
  const auto imgs = gray_images({0.5, 0.5}, 1, 2);
  EXPECT_NEAR(opw(depth, imgs, flows).value, 2.5, 1e-12);
  EXPECT_NEAR(opw(depth, imgs, flows, 50.0).value, 1.0, 1e-12);
  const auto empty = opw(depth, imgs, flows, 5.0);
  EXPECT_TRUE(empty.empty);
}

TEST(Rtc, ThresholdIsStrict) {
  const auto flows = test::zero_flows<double>(2, 12, 12);
  EXPECT_EQ(rtc(constant_seq({100.0, 100.0}), flows).value, 1.0);
  EXPECT_EQ(rtc(constant_seq({100.0, 101.0}), flows).value, 0.0);  // ratio exactly 1.01
  EXPECT_EQ(rtc(constant_seq({200.0, 201.0}), flows).value, 1.0);  // ratio 1.005
  EXPECT_EQ(rtc(constant_seq({101.0, 100.0}), flows).value, 0.0);
  // Single precision inputs convert exactly.
  ScalarSequence<float> f{test::constant<float>(4, 4, 100.0), test::constant<float>(4, 4, 101.0)};
  EXPECT_EQ(rtc(f, test::zero_flows<float>(2, 4, 4)).value, 0.0);
}

TEST(Rtc, MixedPixels) {
  const auto flows = test::zero_flows<double>(2, 1, 4);
  Seq depth{ScalarField<double>(1, 4, std::vector<double>{100, 100, 200, 200}),
            ScalarField<double>(1, 4, std::vector<double>{101, 100, 201, 250})};
  EXPECT_EQ(rtc(depth, flows).value, 0.5);
}

// Reference SSIM written straight from the definition: explicit 2-D
// Gaussian weights, moments per window, no shared helper.
double reference_ssim(const ScalarField<double>& a, const ScalarField<double>& b) {
  double g[11][11], norm = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      norm += g[i][j];
    }
  double lo = 1e300, hi = -1e300;
  for (const auto* f : {&a, &b})
    for (double v : f->values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double L = std::max(hi - lo, 1e-6);
  const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double total = 0.0;
  int n = 0;
  for (int y = 0; y + 11 <= a.height(); ++y)
    for (int x = 0; x + 11 <= a.width(); ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          ma += g[i][j] / norm * a.at(y + i, x + j);
          mb += g[i][j] / norm * b.at(y + i, x + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double da = a.at(y + i, x + j) - ma, db = b.at(y + i, x + j) - mb;
          va += g[i][j] / norm * da * da;
          vb += g[i][j] / norm * db * db;
          cov += g[i][j] / norm * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  return total / n;
}

TEST(Ssim, SelfSimilarityAndConstants) {
  const auto a = test::random_field<double>(16, 20, 1, 3);
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_EQ(ssim(test::constant<double>(12, 12, 4.0), test::constant<double>(12, 12, 4.0)), 1.0);
  const auto f = test::random_field<float>(13, 11, 1, 4, 0.0, 50.0);
  EXPECT_EQ(ssim(f, f), 1.0);
}

TEST(Ssim, MatchesReferenceAndInvertedStructureIsNegative) {
  // Checkerboard sign keeps every window mean near zero.
  auto a = test::random_field<double>(20, 24, 1, 5, 0.8, 1.0);
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      if ((x + y) % 2) a.at(y, x) = -a.at(y, x);
  auto neg = a;
  for (auto& v : neg.values()) v = -v;
  const double s = ssim(a, neg);
  EXPECT_LT(s, 0.0);
  EXPECT_NEAR(s, reference_ssim(a, neg), 1e-10);
  const auto b = test::random_field<double>(20, 24, 1, 6);
  EXPECT_NEAR(ssim(a, b), reference_ssim(a, b), 1e-10);
  EXPECT_GE(ssim(a, b), -1.0);
  EXPECT_LE(ssim(a, b), 1.0);
}

TEST(Ssim, RejectsSmallFields) {
  EXPECT_THROW(ssim(ScalarField<double>(10, 20), ScalarField<double>(10, 20)), ShapeError);
}

TEST(Tcc, FixedPointsAndStaticBias) {
  Seq gt;
  for (std::uint64_t t = 0; t < 4; ++t) {
    auto f = test::random_field<double>(14, 14, 1, t, 1.0, 40.0);
    for (auto& v : f.values()) v = std::round(v);
    gt.push_back(f);
  }
  const auto flows = test::zero_flows<double>(4, 14, 14);
  EXPECT_EQ(tcc(gt, gt, flows).value, 1.0);
  auto biased = gt;
  for (auto& f : biased)
    for (auto& v : f.values()) v += 3.0;
  EXPECT_EQ(tcc(biased, gt, flows).value, 1.0);
  const BlockMatchingFlow<double> bm;
  EXPECT_EQ(tcm(gt, gt, flows, bm).value, 1.0);
}

SequenceBundle<double> scene(std::uint64_t seed, int T = 5) { return generate<double>(random_scene_spec(seed, 48, 64, T)); }

TEST(Tcc, BelowOneOnNoisyScene) {
  auto b = scene(3);
  const auto depth_gt = disparity_to_depth(b.disparity_gt, b.calibration);
  for (double sigma : {0.1, 0.5, 1.0}) {
    perturb(b, sigma, 17);
    EXPECT_LT(tcc(disparity_to_depth(b.predictions["noisy"], b.calibration), depth_gt, b.flows).value, 1.0);
  }
}

// Fronto-parallel scenes have no depth change inside valid regions, so the
// monotonicity probe uses a clip whose depth varies over time.
TEST(Tcc, DecreasesWithNoiseOnChangingDepth) {
  const int T = 5, h = 32, w = 40;
  ScalarSequence<double> disp_gt;
  for (int t = 0; t < T; ++t) {
    ScalarField<double> d(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) d.at(y, x) = 20.0 + 4.0 * std::sin(0.3 * x + 0.4 * t) * std::cos(0.25 * y);
    disp_gt.push_back(d);
  }
  const Calibration cal{500.0, 0.2};
  const auto flows = test::zero_flows<double>(T, h, w);
  const auto depth_gt = disparity_to_depth(disp_gt, cal);
  double prev = 1.0;
  for (double sigma : {0.1, 0.5, 1.0}) {
    Rng rng(17);
    auto noisy = disp_gt;
    for (auto& f : noisy)
      for (auto& v : f.values()) v += sigma * rng.normal();
    const double v = tcc(disparity_to_depth(noisy, cal), depth_gt, flows).value;
    EXPECT_LT(v, prev) << "sigma " << sigma;
    prev = v;
  }
}

TEST(Tcm, DecreasesWithNoise) {
  auto b = scene(4);
  const auto depth_gt = disparity_to_depth(b.disparity_gt, b.calibration);
  const BlockMatchingFlow<double> bm;
  EXPECT_EQ(tcm(depth_gt, depth_gt, b.flows, bm).value, 1.0);
  double prev = 1.0;
  for (double sigma : {0.1, 0.5, 1.0}) {
    perturb(b, sigma, 17);
    const double v = tcm(disparity_to_depth(b.predictions["noisy"], b.calibration), depth_gt, b.flows, bm).value;
    EXPECT_LT(v, prev) << "sigma " << sigma;
    prev = v;
  }
}

TEST(FlowProviders, BlockMatchingRecoversTranslation) {
  const auto b = scene(5, 2);
  ScalarField<double> a(48, 64), moved(48, 64);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      a.at(y, x) = b.left[0].at(y, x, 0);
      moved.at(y, x) = b.left[0].at(std::clamp(y - 1, 0, 47), std::clamp(x - 3, 0, 63), 0);
    }
  const auto f = BlockMatchingFlow<double>().flow(a, moved, {0, false});
  std::size_t hits = 0, n = 0;
  for (int y = 4; y < 44; ++y)
    for (int x = 6; x < 58; ++x, ++n) hits += f.at(y, x, 0) == 3.0 && f.at(y, x, 1) == 1.0;
  EXPECT_GE(double(hits) / double(n), 0.95);
}

TEST(FlowProviders, PrecomputedServesByTransition) {
  VectorSequence<double> pred{test::constant_flow<double>(4, 4, 1, 0)};
  VectorSequence<double> gt{test::constant_flow<double>(4, 4, 0, 2)};
  const PrecomputedFlow<double> p(pred, gt);
  const ScalarField<double> z(4, 4);
  EXPECT_EQ(p.flow(z, z, {0, false}), pred[0]);
  EXPECT_EQ(p.flow(z, z, {0, true}), gt[0]);
  EXPECT_THROW(p.flow(z, z, {1, false}), ValidationError);
}

class SceneMetrics : public ::testing::TestWithParam<std::uint64_t> {};

ClipEvaluationInput<float> input_for(const SequenceBundle<float>& b, const ScalarSequence<float>& pred) {
  ClipEvaluationInput<float> in;
  in.clip_id = b.clip_id;
  in.calibration = b.calibration;
  in.left = b.left;
  in.flows = b.flows;
  in.disparity_gt = b.disparity_gt;
  in.disparity_pred = pred;
  return in;
}

TEST_P(SceneMetrics, GroundTruthFixedPoints) {
  const auto b = generate<float>(random_scene_spec(GetParam(), 48, 64, 5));
  const auto r = evaluate_clip(input_for(b, b.disparity_gt), BlockMatchingFlow<float>());
  EXPECT_EQ(r.scalars.at("EPE"), 0.0);
  EXPECT_EQ(r.scalars.at("TEPE"), 0.0);
  EXPECT_EQ(r.scalars.at("OPW"), 0.0);
  EXPECT_EQ(r.scalars.at("RTC"), 1.0);
  EXPECT_EQ(r.scalars.at("TCC"), 1.0);
  EXPECT_EQ(r.scalars.at("TCM"), 1.0);
}

TEST_P(SceneMetrics, StaticBiasInvariance) {
  const auto b = generate<float>(random_scene_spec(GetParam(), 48, 64, 5));
  auto pred = b.disparity_gt;
  for (auto& f : pred)
    for (auto& v : f.values()) v += 3.0f;
  const auto r = evaluate_clip(input_for(b, pred), BlockMatchingFlow<float>());
  EXPECT_EQ(r.scalars.at("TEPE"), 0.0);
  EXPECT_EQ(r.scalars.at("delta_t_1px"), 0.0);
  EXPECT_EQ(r.scalars.at("delta_t_3px"), 0.0);
  EXPECT_EQ(r.scalars.at("EPE"), 3.0);
  EXPECT_EQ(r.scalars.at("TCC"), 1.0);
}

TEST_P(SceneMetrics, ReportShapeAndRanges) {
  auto b = generate<float>(random_scene_spec(GetParam(), 48, 64, 5));
  perturb(b, 1.5, 3);
  const auto r = evaluate_clip(input_for(b, b.predictions["noisy"]), BlockMatchingFlow<float>());
  for (const char* k : {"EPE", "TEPE", "delta_1px", "delta_3px", "delta_t_1px", "delta_t_3px", "OPW", "RTC", "TCC",
                        "TCM"}) {
    ASSERT_TRUE(r.scalars.count(k)) << k;
    EXPECT_TRUE(std::isfinite(r.scalars.at(k)));
  }
  for (const char* k : {"delta_1px", "delta_3px", "delta_t_1px", "delta_t_3px"}) {
    EXPECT_GE(r.scalars.at(k), 0.0);
    EXPECT_LE(r.scalars.at(k), 100.0);
  }
  EXPECT_GE(r.scalars.at("delta_1px"), r.scalars.at("delta_3px"));
  EXPECT_GE(r.scalars.at("delta_t_1px"), r.scalars.at("delta_t_3px"));
  for (const char* k : {"RTC", "TCC", "TCM"}) {
    EXPECT_GE(r.scalars.at(k), -1.0);
    EXPECT_LE(r.scalars.at(k), 1.0);
    EXPECT_LT(r.scalars.at(k), 1.0);
  }
  EXPECT_GT(r.scalars.at("OPW"), 0.0);
  EXPECT_EQ(r.per_frame.at("EPE").size(), 5u);
  EXPECT_EQ(r.per_frame.at("TEPE").size(), 4u);
  EXPECT_EQ(r.frames, 5u);
  EXPECT_EQ(r.flow_provider, "block-matching");
}

INSTANTIATE_TEST_SUITE_P(Seeds, SceneMetrics, ::testing::ValuesIn(test::kSceneSeeds));

}  // namespace
}  // namespace bida
