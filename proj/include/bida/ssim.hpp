// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "bida/field.hpp"

namespace bida {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

namespace detail {
inline const std::array<double, kSsimWindow>& ssim_kernel() {
  static const auto k = [] {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double r = i - kSsimWindow / 2;
      w[std::size_t(i)] = std::exp(-r * r / (2.0 * kSsimSigma * kSsimSigma));
      sum += w[std::size_t(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return k;
}

// Gaussian-weighted mean of p(y, x) over the window whose top-left corner is
// (y0, x0).  Every moment goes through this one routine so that ssim(a, a)
// evaluates identical expressions in numerator and denominator.
template <typename Fn>
double window_mean(int y0, int x0, Fn&& p) {
  const auto& k = ssim_kernel();
  double acc = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    double row = 0.0;
    for (int j = 0; j < kSsimWindow; ++j) row += k[std::size_t(j)] * p(y0 + i, x0 + j);
    acc += k[std::size_t(i)] * row;
  }
  return acc;
}
}  // namespace detail

/// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5).
/// The dynamic range L is max - min over both inputs, floored at 1e-6.
template <typename Real>
double ssim(const ScalarField<Real>& a, const ScalarField<Real>& b) {
  require_same_extent(a, b, "ssim");
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw ShapeError("ssim: fields must be at least 11x11");
  }
  const auto [amin, amax] = std::minmax_element(a.values().begin(), a.values().end());
  const auto [bmin, bmax] = std::minmax_element(b.values().begin(), b.values().end());
  const double L = std::max(double(std::max(*amax, *bmax)) - double(std::min(*amin, *bmin)), 1e-6);
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);

  const int ny = a.height() - kSsimWindow + 1;
  const int nx = a.width() - kSsimWindow + 1;
  double total = 0.0;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      auto va = [&](int i, int j) { return double(a.at(i, j)); };
      auto vb = [&](int i, int j) { return double(b.at(i, j)); };
      const double mu_a = detail::window_mean(y, x, va);
      const double mu_b = detail::window_mean(y, x, vb);
      const double e_aa = detail::window_mean(y, x, [&](int i, int j) { return va(i, j) * va(i, j); });
      const double e_bb = detail::window_mean(y, x, [&](int i, int j) { return vb(i, j) * vb(i, j); });
      const double e_ab = detail::window_mean(y, x, [&](int i, int j) { return va(i, j) * vb(i, j); });
      const double var_a = e_aa - mu_a * mu_a;
      const double var_b = e_bb - mu_b * mu_b;
      const double cov = e_ab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
    }
  }
  return total / double(ny * nx);
}

}  // namespace bida
