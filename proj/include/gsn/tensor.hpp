#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gsn/errors.hpp"

namespace gsn {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor. Rank is whatever the shape says; the model only
/// ever needs vectors and matrices.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), fill) {
    for (int d : shape_)
      if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor from(Shape shape, std::vector<T> values) {
    Tensor t;
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
      throw ShapeError("value count does not match shape " + shape_str(shape));
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // 2-D access; row-major.
  T& at(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
  const T& at(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void add_scaled(const Tensor& o, T c) {
    require_same_shape(o, "add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += c * o.data_[i];
  }

  void scale(T c) {
    for (auto& v : data_) v *= c;
  }

  T dot(const Tensor& o) const {
    require_same_shape(o, "dot");
    T acc = T(0);
    for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * o.data_[i];
    return acc;
  }

  T sum_squares() const {
    T acc = T(0);
    for (T v : data_) acc += v * v;
    return acc;
  }

  T max_abs() const {
    T m = T(0);
    for (T v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void require_finite(const char* where) const {
    if (!all_finite()) throw NumericalError(std::string("non-finite value in ") + where);
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  void require_same_shape(const Tensor& o, const char* where) const {
    if (shape_ != o.shape_)
      throw ShapeError(std::string(where) + ": shape mismatch " + shape_str(shape_) + " vs " +
                       shape_str(o.shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

// Uniform double in [0,1) from the top 53 bits of the engine output.
// Hand-rolled so streams are identical across standard libraries.
inline double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double next_uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * next_uniform(rng);
}

/// Glorot/fan-balanced uniform init for a weight matrix [rows, cols].
template <typename T>
Tensor<T> xavier_uniform(int rows, int cols, std::mt19937_64& rng) {
  Tensor<T> t(Shape{rows, cols});
  const double limit = std::sqrt(6.0 / (rows + cols));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(next_uniform(rng, -limit, limit));
  return t;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(next_uniform(rng, lo, hi));
  return t;
}

}  // namespace gsn
