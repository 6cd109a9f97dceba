#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cslab/errors.hpp"

namespace cslab {

/// Dense row-major float tensor. Shapes are small (images, filters,
/// logit vectors), so everything lives in one flat vector.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
    data.assign(numel_of(shape), 0.0f);
  }
  Tensor(std::vector<int> shape_, std::vector<float> data_)
      : shape(std::move(shape_)), data(std::move(data_)) {
    if (static_cast<std::size_t>(numel_of(shape)) != data.size())
      throw InvalidInputError("tensor shape/data size mismatch");
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) {
      if (d < 0) throw InvalidInputError("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  long numel() const { return static_cast<long>(data.size()); }
  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  int argmax() const {
    // ties break to the lowest index
    int best = 0;
    for (std::size_t i = 1; i < data.size(); ++i)
      if (data[i] > data[best]) best = static_cast<int>(i);
    return best;
  }

  float linf_norm() const {
    float m = 0.0f;
    for (float v : data) m = std::max(m, std::fabs(v));
    return m;
  }

  double l2_norm() const {
    double s = 0.0;
    for (float v : data) s += static_cast<double>(v) * v;
    return std::sqrt(s);
  }

  void clip_(float lo, float hi) {
    for (float& v : data) v = std::min(hi, std::max(lo, v));
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw InvalidInputError("tensor shape mismatch in subtraction");
  Tensor r(a.shape);
  for (std::size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] - b.data[i];
  return r;
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw InvalidInputError("tensor shape mismatch in addition");
  Tensor r(a.shape);
  for (std::size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] + b.data[i];
  return r;
}

}  // namespace cslab
