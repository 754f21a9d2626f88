#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace prunekit {

// Dense n-dimensional array of doubles, row-major. A scalar has an empty
// shape and one element.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() : data(1, 0.0) {}

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }

  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape))
      throw std::invalid_argument("tensor: shape/data size mismatch");
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int e : s) {
      if (e <= 0) throw std::invalid_argument("tensor: nonpositive extent");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.data[0] = v;
    return t;
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Row-major offsets for the ranks the op set uses.
  double& at2(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at2(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

  std::size_t off4(int a, int b, int c, int d) const {
    return ((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace prunekit
