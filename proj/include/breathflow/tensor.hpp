#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace breathflow {

/// Dense row-major tensor. Activations use [T, C, H, W] (frames first).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), values_(count(shape_), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  T& at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) {
    return values_[((t * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  const T& at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
    return values_[((t * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    for (const T& v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> values_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace breathflow
