// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bida/error.hpp"
#include "bida/random.hpp"
#include "bida/tensor.hpp"

namespace bida {

struct GradcheckEntry {
  std::string name;  ///< scalar index, tensor name or "global:<k>"
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;

  bool passed(double tolerance) const { return !entries.empty() && max_rel_error <= tolerance; }
};

enum class GradcheckMode {
  per_scalar,     ///< one central difference per parameter
  per_direction,  ///< one random unit direction per tensor plus global directions
};

struct GradcheckOptions {
  double h = 1e-5;
  GradcheckMode mode = GradcheckMode::per_direction;
  int global_directions = 4;
  std::uint64_t seed = 0;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-12;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {
inline void finish(GradcheckReport& r) {
  double sum = 0.0;
  r.max_rel_error = 0.0;
  for (const auto& e : r.entries) {
    r.max_rel_error = std::max(r.max_rel_error, e.rel_error);
    sum += e.rel_error;
  }
  r.mean_rel_error = r.entries.empty() ? 0.0 : sum / double(r.entries.size());
}

inline double probe(const std::function<double()>& loss, const std::string& what) {
  const double v = loss();
  if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite loss when probing " + what);
  return v;
}
}  // namespace detail

/// Central differences (L(p + h e_i) - L(p - h e_i)) / 2h for every scalar of
/// a flat parameter vector.  `params` is restored on return.
inline GradcheckReport gradcheck(std::span<double> params,
                                 const std::function<double(std::span<const double>)>& loss,
                                 std::span<const double> analytic, double h = 1e-5,
                                 double floor = 1e-12) {
  if (!(h > 0.0)) throw ValueError("gradcheck: h must be > 0");
  if (analytic.size() != params.size()) throw ShapeError("gradcheck: gradient length mismatch");
  GradcheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    const std::string what = "parameter " + std::to_string(i);
    params[i] = saved + h;
    const double up = detail::probe([&] { return loss(params); }, what);
    params[i] = saved - h;
    const double down = detail::probe([&] { return loss(params); }, what);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    report.entries.push_back({what, analytic[i], numeric, relative_error(analytic[i], numeric, floor)});
  }
  detail::finish(report);
  return report;
}

/// Gradient check over a weight bank.  `loss` is evaluated on the
/// (temporarily perturbed) bank; `analytic` holds dL/dtheta with the same
/// names and shapes.
inline GradcheckReport gradcheck(WeightBank<double>& params,
                                 const std::function<double(const WeightBank<double>&)>& loss,
                                 const WeightBank<double>& analytic, const GradcheckOptions& opt = {}) {
  if (!(opt.h > 0.0)) throw ValueError("gradcheck: h must be > 0");
  for (const auto& [name, t] : params.tensors()) {
    if (analytic.get(name).shape != t.shape) throw ShapeError("gradcheck: gradient shape mismatch for " + name);
  }
  GradcheckReport report;
  const double h = opt.h;

  auto directional = [&](const std::string& label, const std::map<std::string, std::vector<double>>& dir) {
    auto apply = [&](double step) {
      for (const auto& [name, v] : dir) {
        auto& vals = params.get(name).values;
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] += step * v[i];
      }
    };
    std::map<std::string, std::vector<double>> saved;
    for (const auto& [name, _] : dir) saved[name] = params.get(name).values;
    auto restore = [&] {
      for (const auto& [name, v] : saved) params.get(name).values = v;
    };
    apply(h);
    const double up = detail::probe([&] { return loss(params); }, label);
    restore();
    apply(-h);
    const double down = detail::probe([&] { return loss(params); }, label);
    restore();
    double a = 0.0;
    for (const auto& [name, v] : dir) {
      const auto& g = analytic.get(name).values;
      for (std::size_t i = 0; i < v.size(); ++i) a += g[i] * v[i];
    }
    const double numeric = (up - down) / (2.0 * h);
    report.entries.push_back({label, a, numeric, relative_error(a, numeric, opt.floor)});
  };

  if (opt.mode == GradcheckMode::per_scalar) {
    for (const auto& [name, t] : analytic.tensors()) {
      for (std::size_t i = 0; i < t.numel(); ++i) {
        std::vector<double> e(t.numel(), 0.0);
        e[i] = 1.0;
        directional(name + "[" + std::to_string(i) + "]", {{name, std::move(e)}});
      }
    }
  } else {
    Rng rng(opt.seed);
    auto unit = [&](std::size_t n, double norm_target) {
      std::vector<double> v(n);
      double norm = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (auto& x : v) x *= norm_target / norm;
      return v;
    };
    for (const auto& [name, t] : analytic.tensors()) directional(name, {{name, unit(t.numel(), 1.0)}});
    const double share = 1.0 / std::sqrt(double(analytic.size()));
    for (int k = 0; k < opt.global_directions; ++k) {
      std::map<std::string, std::vector<double>> dir;
      for (const auto& [name, t] : analytic.tensors()) dir[name] = unit(t.numel(), share);
      directional("global:" + std::to_string(k), dir);
    }
  }
  detail::finish(report);
  return report;
}

}  // namespace bida
