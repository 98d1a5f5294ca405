// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "bida/error.hpp"
#include "bida/random.hpp"

namespace bida {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t(1),
                         [](std::size_t a, int b) { return a * std::size_t(b); });
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/// Dense row-major parameter tensor.
template <typename Real>
struct Tensor {
  Shape shape;
  std::vector<Real> values;

  Tensor() = default;
  explicit Tensor(Shape s, Real fill = Real(0)) : shape(std::move(s)), values(shape_numel(shape), fill) {}
  Tensor(Shape s, std::vector<Real> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_numel(shape)) {
      throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                       shape_string(shape));
    }
  }

  std::size_t numel() const noexcept { return values.size(); }
  bool operator==(const Tensor&) const = default;
};

/// Named parameter store.  Iteration order is lexicographic by name, which
/// fixes the serialization and accumulation order.
template <typename Real>
class WeightBank {
 public:
  using Map = std::map<std::string, Tensor<Real>>;

  void set(const std::string& name, Tensor<Real> t) { tensors_[name] = std::move(t); }

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  const Tensor<Real>& get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw WeightError("missing weight tensor '" + name + "'");
    return it->second;
  }

  Tensor<Real>& get(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw WeightError("missing weight tensor '" + name + "'");
    return it->second;
  }

  /// get() plus an exact shape check.
  const Tensor<Real>& require(const std::string& name, const Shape& shape) const {
    const auto& t = get(name);
    if (t.shape != shape) {
      throw WeightError("weight tensor '" + name + "' has shape " + shape_string(t.shape) +
                        ", expected " + shape_string(shape));
    }
    return t;
  }

  void require_finite() const {
    for (const auto& [name, t] : tensors_) {
      for (Real v : t.values) {
        if (!std::isfinite(v)) throw ValueError("weight tensor '" + name + "' has a non-finite value");
      }
    }
  }

  const Map& tensors() const noexcept { return tensors_; }
  Map& tensors() noexcept { return tensors_; }
  std::size_t size() const noexcept { return tensors_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.numel();
    return n;
  }

  /// Same names and shapes, all zero.
  WeightBank zeros_like() const {
    WeightBank out;
    for (const auto& [name, t] : tensors_) out.set(name, Tensor<Real>(t.shape));
    return out;
  }

  template <typename To>
  WeightBank<To> cast() const {
    WeightBank<To> out;
    for (const auto& [name, t] : tensors_) {
      out.set(name, Tensor<To>(t.shape, std::vector<To>(t.values.begin(), t.values.end())));
    }
    return out;
  }

  void for_each_value(const std::function<void(Real&)>& fn) {
    for (auto& [_, t] : tensors_)
      for (auto& v : t.values) fn(v);
  }

  bool operator==(const WeightBank&) const = default;

 private:
  Map tensors_;
};

/// Fan-in scaled normal initialisation for conv weights ([out, in, k...]).
template <typename Real>
Tensor<Real> random_conv_weight(const Shape& shape, Rng& rng, double gain = 1.0) {
  std::size_t fan_in = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= std::size_t(shape[i]);
  const double sigma = gain / std::sqrt(double(fan_in));
  Tensor<Real> t(shape);
  for (auto& v : t.values) v = Real(rng.normal(0.0, sigma));
  return t;
}

}  // namespace bida
