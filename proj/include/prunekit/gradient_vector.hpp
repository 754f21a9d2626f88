#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "prunekit/tensor.hpp"

namespace prunekit {

// A vector in parameter space: one tensor per parameter leaf, in leaf
// registration order (layer-major, row-major within each tensor). That
// fixed order makes flatten() and dot() reproducible bit-for-bit.
struct GradientVector {
  std::vector<Tensor> parts;

  GradientVector() = default;
  explicit GradientVector(std::vector<Tensor> p) : parts(std::move(p)) {}

  static GradientVector zeros_like(const GradientVector& v) {
    GradientVector out;
    out.parts.reserve(v.parts.size());
    for (const auto& t : v.parts) out.parts.emplace_back(t.shape);
    return out;
  }

  bool same_shape(const GradientVector& o) const {
    if (parts.size() != o.parts.size()) return false;
    for (std::size_t i = 0; i < parts.size(); ++i)
      if (!parts[i].same_shape(o.parts[i])) return false;
    return true;
  }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& t : parts) n += t.numel();
    return n;
  }

  void fill(double v) {
    for (auto& t : parts) t.fill(v);
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(numel());
    for (const auto& t : parts) out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
  }

  // Fill this vector's parts from a flat buffer, in registration order.
  void unflatten(const std::vector<double>& flat) {
    if (flat.size() != numel())
      throw std::invalid_argument("unflatten: flat size mismatch");
    std::size_t k = 0;
    for (auto& t : parts)
      for (auto& x : t.data) x = flat[k++];
  }

  GradientVector& operator+=(const GradientVector& o) {
    check_shape(o);
    for (std::size_t i = 0; i < parts.size(); ++i)
      for (std::size_t j = 0; j < parts[i].data.size(); ++j)
        parts[i].data[j] += o.parts[i].data[j];
    return *this;
  }

  GradientVector& operator*=(double c) {
    for (auto& t : parts)
      for (auto& x : t.data) x *= c;
    return *this;
  }

  // this += c * o
  void axpy(double c, const GradientVector& o) {
    check_shape(o);
    for (std::size_t i = 0; i < parts.size(); ++i)
      for (std::size_t j = 0; j < parts[i].data.size(); ++j)
        parts[i].data[j] += c * o.parts[i].data[j];
  }

  bool all_finite() const {
    for (const auto& t : parts)
      for (double x : t.data)
        if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  void check_shape(const GradientVector& o) const {
    if (!same_shape(o)) throw std::invalid_argument("gradient vector shape mismatch");
  }
};

inline double dot(const GradientVector& a, const GradientVector& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    const auto& x = a.parts[i].data;
    const auto& y = b.parts[i].data;
    for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * y[j];
  }
  return s;
}

inline double norm2(const GradientVector& a) { return dot(a, a); }

inline GradientVector operator*(double c, GradientVector v) {
  v *= c;
  return v;
}

inline GradientVector operator+(GradientVector a, const GradientVector& b) {
  a += b;
  return a;
}

}  // namespace prunekit
