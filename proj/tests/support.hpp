// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bida/bida.hpp"

namespace bida::test {

template <typename Real, int K = 1>
BasicField<Real, K> random_field(int h, int w, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<Real> v(std::size_t(h) * std::size_t(w) * std::size_t(c));
  for (auto& x : v) x = Real(rng.uniform(lo, hi));
  return BasicField<Real, K>(h, w, c, std::move(v));
}

template <typename Real>
ScalarField<Real> constant(int h, int w, double v) {
  return ScalarField<Real>(h, w, Real(v));
}

template <typename Real>
VectorField<Real> constant_flow(int h, int w, double u, double v) {
  VectorField<Real> f(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f.at(y, x, 0) = Real(u);
      f.at(y, x, 1) = Real(v);
    }
  return f;
}

template <typename Real>
ClipFlows<Real> zero_flows(std::size_t frames, int h, int w) {
  ClipFlows<Real> f;
  for (std::size_t t = 0; t + 1 < frames; ++t) {
    f.forward.emplace_back(h, w);
    f.backward.emplace_back(h, w);
  }
  return f;
}

template <typename Real, int K>
double max_abs_diff(const BasicField<Real, K>& a, const BasicField<Real, K>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.values()[i]) - double(b.values()[i])));
  return m;
}

/// Seeds of the synthetic scene test matrix.
inline constexpr std::uint64_t kSceneSeeds[] = {1, 2, 3, 4, 5, 6};

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bida_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace bida::test
