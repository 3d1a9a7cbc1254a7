#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fakegan/errors.hpp"

namespace fakegan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major array of doubles.
class Array {
 public:
  Array() = default;

  explicit Array(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw DimensionError("array shape " + shape_string(shape_) + " does not match " +
                           std::to_string(data_.size()) + " values");
    }
  }

  static Array vector(std::initializer_list<double> values) {
    return Array({values.size()}, std::vector<double>(values));
  }
  static Array vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Array({n}, std::move(values));
  }
  static Array scalar(double v) { return Array({1}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D access; the array must be a matrix.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<const double> row(std::size_t r) const {
    const std::size_t cols = size() / shape_[0];
    return std::span<const double>(data_).subspan(r * cols, cols);
  }
  std::span<double> row(std::size_t r) {
    const std::size_t cols = size() / shape_[0];
    return std::span<double>(data_).subspan(r * cols, cols);
  }

  Array reshaped(Shape shape) const { return Array(std::move(shape), data_); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_shape(const Array& a, const Shape& expected, const char* what) {
  if (a.shape() != expected) {
    throw DimensionError(std::string(what) + ": expected shape " + shape_string(expected) +
                         ", got " + shape_string(a.shape()));
  }
}

}  // namespace fakegan
