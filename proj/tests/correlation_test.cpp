// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"

namespace bida {
namespace {

// Independent bilinear sampler: explicit four-corner weights on clamped
// coordinates (the library uses a lerp form).
double oracle_sample(const ChannelField<double>& f, double x, double y, int c) {
  x = std::clamp(x, 0.0, double(f.width() - 1));
  y = std::clamp(y, 0.0, double(f.height() - 1));
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const int x1 = std::min(x0 + 1, f.width() - 1), y1 = std::min(y0 + 1, f.height() - 1);
  const double ax = x - x0, ay = y - y0;
  return (1 - ax) * (1 - ay) * f.at(y0, x0, c) + ax * (1 - ay) * f.at(y0, x1, c) + (1 - ax) * ay * f.at(y1, x0, c) +
         ax * ay * f.at(y1, x1, c);
}

// Right features of a neighbour as seen from pixel (qx, qy) of the centre
// frame: temporal alignment by `flow`, then disparity alignment.
double oracle_right(const ChannelField<double>& right, const VectorField<double>& flow, const ScalarField<double>& d,
                    int qx, int qy, int c) {
  // Disparity warp samples the aligned field at (qx - d, qy); the aligned
  // field itself is sampled bilinearly, so compose at the two corner rows.
  const double sx = qx - d.at(qy, qx);
  const double cx = std::clamp(sx, 0.0, double(right.width() - 1));
  const int x0 = int(std::floor(cx));
  const int x1 = std::min(x0 + 1, right.width() - 1);
  const double ax = cx - x0;
  auto aligned = [&](int x, int y) {
    return oracle_sample(right, x + flow.at(y, x, 0), y + flow.at(y, x, 1), c);
  };
  return (1 - ax) * aligned(x0, qy) + ax * aligned(x1, qy);
}

ChannelField<double> oracle_cost_volume(const ChannelField<double>& left, const ChannelField<double>& rp,
                                        const ChannelField<double>& rc, const ChannelField<double>& rn,
                                        const VectorField<double>& fp, const VectorField<double>& fn,
                                        const ScalarField<double>& d, const SearchRange& range) {
  const int h = left.height(), w = left.width(), C = left.channels(), R = range.size();
  const VectorField<double> zero(h, w);
  ChannelField<double> out(h, w, 3 * R, 0.0);
  const ChannelField<double>* rights[3] = {&rp, &rc, &rn};
  const VectorField<double>* flows[3] = {&fp, &zero, &fn};
  for (int b = 0; b < 3; ++b)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int r = 0; r < R; ++r) {
          const auto o = range.offsets()[std::size_t(r)];
          const int qx = std::clamp(x + o.dx, 0, w - 1), qy = std::clamp(y + o.dy, 0, h - 1);
          double acc = 0.0;
          for (int c = 0; c < C; ++c) acc += left.at(y, x, c) * oracle_right(*rights[b], *flows[b], d, qx, qy, c);
          out.at(y, x, b * R + r) = acc / C;
        }
  return out;
}

TEST(SearchRange, StandardSchedule) {
  const auto r0 = standard_ranges(0);
  ASSERT_EQ(r0.size(), 9);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(r0.offsets()[std::size_t(i)], (Offset{i - 4, 0}));
  const auto r1 = standard_ranges(1);
  ASSERT_EQ(r1.size(), 9);
  std::set<Offset> want;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) want.insert({dx, dy});
  EXPECT_EQ(std::set<Offset>(r1.offsets().begin(), r1.offsets().end()), want);
  EXPECT_EQ(standard_ranges(2), r0);
  EXPECT_EQ(standard_ranges(3), r1);
  EXPECT_THROW(standard_ranges(-1), ValueError);
}

TEST(SearchRange, RejectsEmptyAndDuplicates) {
  EXPECT_THROW(SearchRange({}), ValueError);
  EXPECT_THROW(SearchRange({{1, 0}, {1, 0}}), ValueError);
}

TEST(Correlate, SinglePixelExample) {
  const ChannelField<float> l(1, 1, 2, std::vector<float>{1, 2});
  const ChannelField<float> r(1, 1, 2, std::vector<float>{3, 4});
  const auto c = correlate(l, r, ScalarField<float>(1, 1), SearchRange({{0, 0}}));
  EXPECT_EQ(c.at(0, 0, 0), 5.5f);
}

TEST(Correlate, ConstantUnitFeatureIsOffsetInvariant) {
  const float s = 1.f / std::sqrt(3.f);
  const ChannelField<float> f(6, 6, 3, s);
  const auto c = correlate(f, f, ScalarField<float>(6, 6), standard_ranges(0));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      for (int r = 0; r < 9; ++r) EXPECT_EQ(c.at(y, x, r), c.at(0, 0, 0));
  EXPECT_NEAR(c.at(0, 0, 0), 1.0 / 3.0, 1e-7);
}

TEST(Correlate, NormOptions) {
  const ChannelField<double> l(1, 1, 4, 1.0), r(1, 1, 4, 2.0);
  const ScalarField<double> d(1, 1);
  const SearchRange o({{0, 0}});
  EXPECT_EQ(correlate(l, r, d, o, CorrelationNorm::mean).at(0, 0, 0), 2.0);
  EXPECT_EQ(correlate(l, r, d, o, CorrelationNorm::sqrt_dim).at(0, 0, 0), 4.0);
  EXPECT_EQ(correlate(l, r, d, o, CorrelationNorm::sum).at(0, 0, 0), 8.0);
  EXPECT_EQ(parse_correlation_norm("sqrt"), CorrelationNorm::sqrt_dim);
  EXPECT_THROW(parse_correlation_norm("l2"), ValidationError);
}

TEST(Correlate, ShapeMismatchThrows) {
  const ChannelField<float> a(4, 4, 2, 0.f), b(4, 5, 2, 0.f), c(4, 4, 3, 0.f);
  EXPECT_THROW(correlate(a, b, ScalarField<float>(4, 4), standard_ranges(0)), ShapeError);
  EXPECT_THROW(correlate(a, c, ScalarField<float>(4, 4), standard_ranges(0)), ShapeError);
  EXPECT_THROW(correlate(a, a, ScalarField<float>(3, 4), standard_ranges(0)), ShapeError);
}

TEST(TripleCostVolume, MatchesBruteForceOracle) {
  Rng rng(2024);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int h = int(rng.integer(1, 8)), w = int(rng.integer(1, 8)), C = int(rng.integer(1, 4));
    const auto seed = std::uint64_t(inst) * 10;
    const auto l = test::random_field<double, 0>(h, w, C, seed + 1);
    const auto rp = test::random_field<double, 0>(h, w, C, seed + 2);
    const auto rc = test::random_field<double, 0>(h, w, C, seed + 3);
    const auto rn = test::random_field<double, 0>(h, w, C, seed + 4);
    const auto fp = test::random_field<double, 2>(h, w, 2, seed + 5, -2.5, 2.5);
    const auto fn = test::random_field<double, 2>(h, w, 2, seed + 6, -2.5, 2.5);
    const auto d = test::random_field<double>(h, w, 1, seed + 7, 0.0, 4.0);
    for (int it = 0; it < 2; ++it) {
      const auto range = standard_ranges(it);
      const auto got = triple_cost_volume(l, rp, rc, rn, fp, fn, d, range);
      const auto want = oracle_cost_volume(l, rp, rc, rn, fp, fn, d, range);
      ASSERT_EQ(got.channels(), 27);
      worst = std::max(worst, test::max_abs_diff(got, want));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(TripleCostVolume, ChannelCountIsThreeTimesRange) {
  const ChannelField<float> f(5, 5, 2, 0.1f);
  const VectorField<float> z(5, 5);
  const SearchRange r({{0, 0}, {1, 0}, {0, 2}, {-3, 1}});
  EXPECT_EQ(triple_cost_volume(f, f, f, f, z, z, ScalarField<float>(5, 5), r).channels(), 12);
}

TEST(TripleCostVolume, StaticSceneBlocksIdentical) {
  const auto l = test::random_field<float, 0>(8, 8, 4, 1);
  const auto r = test::random_field<float, 0>(8, 8, 4, 2);
  const auto d = test::random_field<float>(8, 8, 1, 3, 0.0, 3.0);
  const VectorField<float> z(8, 8);
  const auto cv = triple_cost_volume(l, r, r, r, z, z, d, standard_ranges(1));
  EXPECT_EQ(slice_channels(cv, 0, 9), slice_channels(cv, 9, 9));
  EXPECT_EQ(slice_channels(cv, 9, 9), slice_channels(cv, 18, 9));
}

TEST(AlignNeighbors, ZeroFlowAndConstantFields) {
  const auto p = test::random_field<float, 0>(5, 6, 2, 1);
  const auto n = test::random_field<float, 0>(5, 6, 2, 2);
  const VectorField<float> z(5, 6);
  const auto [ap, an] = align_neighbors(p, n, z, z);
  EXPECT_EQ(ap, p);
  EXPECT_EQ(an, n);
  const ChannelField<float> c(5, 6, 2, -0.25f);
  const auto f = test::random_field<float, 2>(5, 6, 2, 3, -4.0, 4.0);
  const auto [cp, cn] = align_neighbors(c, c, f, f);
  EXPECT_EQ(cp, c);
  EXPECT_EQ(cn, c);
}

TEST(Correlate, EquivariantUnderIntegerShift) {
  const int h = 12, w = 16, C = 3, s = 2;
  const auto l = test::random_field<float, 0>(h, w, C, 5);
  const auto r = test::random_field<float, 0>(h, w, C, 6);
  ChannelField<float> ls(h, w, C, 0.f), rs(h, w, C, 0.f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < C; ++c) {
        ls.at(y, x, c) = l.at(y, std::max(x - s, 0), c);
        rs.at(y, x, c) = r.at(y, std::max(x - s, 0), c);
      }
  const ScalarField<float> d(h, w);
  const auto range = standard_ranges(0);
  const auto a = correlate(l, r, d, range);
  const auto b = correlate(ls, rs, d, range);
  for (int y = 0; y < h; ++y)
    for (int x = s + 4; x < w - 4; ++x)
      for (int k = 0; k < 9; ++k) ASSERT_EQ(b.at(y, x, k), a.at(y, x - s, k));
}

// Zero-mean 3x3 patches of the rendered image, unit-normalised per pixel.
ChannelField<double> patch_features(const ChannelField<double>& img) {
  const int h = img.height(), w = img.width();
  ChannelField<double> f(h, w, 27, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double norm = 0.0;
      int k = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          for (int c = 0; c < 3; ++c, ++k) {
            const double v = img.at(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1), c) - 0.5;
            f.at(y, x, k) = v;
            norm += v * v;
          }
      for (k = 0; k < 27; ++k) f.at(y, x, k) /= std::sqrt(std::max(norm, 1e-12));
    }
  return f;
}

// True when the descriptor support of (x, y) and of its right-view match
// (including the interpolation taps) shows one layer only.
bool single_surface(const SceneSpec& spec, int x, int y, int t, double d) {
  const auto layer = detail::front_layer(spec, x, y, t, 0.0);
  const int xr = int(std::floor(x - d));
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 2; ++dx) {
      if (dx <= 1 && detail::front_layer(spec, x + dx, y + dy, t, 0.0) != layer) return false;
      if (detail::front_layer(spec, xr + dx, y + dy, t, 1.0) != layer) return false;
    }
  return true;
}

class SceneCorrelation : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(SceneCorrelation, GroundTruthOffsetWinsOnVisiblePixels) {
  const auto spec = random_scene_spec(GetParam(), 48, 64, 3);
  const auto b = generate<double>(spec);
  const std::size_t t = 1;
  ChannelSequence<double> fl, fr;
  for (std::size_t k = 0; k < b.frames(); ++k) {
    fl.push_back(patch_features(b.left[k]));
    fr.push_back(patch_features(b.right[k]));
  }
  for (int it = 0; it < 2; ++it) {
    const auto range = standard_ranges(it);
    const int zero = 4;  // (0, 0) sits in the middle of both ranges
    const auto cv = clip_cost_volumes(fl, fr, b.flows, b.disparity_gt, range).at(t);
    ASSERT_EQ(cv.channels(), 27);
    const auto center = slice_channels(cv, 9, 9);
    std::size_t total = 0, wins = 0;
    for (int y = 2; y < b.height() - 2; ++y)
      for (int x = 6; x < b.width() - 6; ++x) {
        if (b.visible_right[t].at(y, x) == 0.0 || x - b.disparity_gt[t].at(y, x) < 6) continue;
        if (!single_surface(spec, x, y, int(t), b.disparity_gt[t].at(y, x))) continue;
        ++total;
        int best = 0;
        for (int r = 1; r < range.size(); ++r)
          if (center.at(y, x, r) > center.at(y, x, best)) best = r;
        wins += best == zero;
      }
    ASSERT_GT(total, 500u);
    EXPECT_GE(double(wins) / double(total), 0.95) << "range " << it;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SceneCorrelation, ::testing::ValuesIn(test::kSceneSeeds));

}  // namespace
}  // namespace bida
