#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcmeta/error.hpp"

namespace pcmeta {

/// Row-major matrix extent. Every tensor in the library is rank 2: vectors
/// are single rows and scalars are 1x1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] constexpr std::size_t size() const noexcept { return rows * cols; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

template <std::floating_point T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), values_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw DimensionError("tensor of shape " + to_string(shape_) + " given " +
                           std::to_string(values_.size()) + " values");
    }
  }
  /// Nested-list construction, mostly for tests: `Tensor<double>({{1, 2}, {3, 4}})`.
  Tensor(std::initializer_list<std::initializer_list<T>> rows) {
    shape_.rows = rows.size();
    shape_.cols = rows.size() == 0 ? 0 : rows.begin()->size();
    values_.reserve(shape_.size());
    for (const auto& r : rows) {
      if (r.size() != shape_.cols) throw DimensionError("ragged tensor literal");
      values_.insert(values_.end(), r.begin(), r.end());
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{1, 1}, v); }
  static Tensor row(std::vector<T> v) {
    const std::size_t n = v.size();
    return Tensor(Shape{1, n}, std::move(v));
  }
  static Tensor identity(std::size_t n) {
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = T(1);
    return t;
  }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t rows() const noexcept { return shape_.rows; }
  [[nodiscard]] std::size_t cols() const noexcept { return shape_.cols; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  T& operator()(std::size_t r, std::size_t c) noexcept {
    assert(r < shape_.rows && c < shape_.cols);
    return values_[r * shape_.cols + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    assert(r < shape_.rows && c < shape_.cols);
    return values_[r * shape_.cols + c];
  }
  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  [[nodiscard]] T item() const {
    if (shape_ != Shape{1, 1}) throw ContractError("item() on non-scalar tensor " + to_string(shape_));
    return values_.front();
  }

  [[nodiscard]] std::span<T> values() noexcept { return values_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return values_; }
  [[nodiscard]] std::span<const T> row_span(std::size_t r) const noexcept {
    return std::span<const T>(values_).subspan(r * shape_.cols, shape_.cols);
  }

  [[nodiscard]] bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  template <std::floating_point U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> values_;
};

namespace kernel {

/// c = a * b. The accumulation order over the inner dimension is the same for
/// every output row, so permuting the rows of `a` permutes the rows of `c`
/// bit-exactly.
template <std::floating_point T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + to_string(a.shape()) + " * " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> c(Shape{m, n});
  const T* pa = a.values().data();
  const T* pb = b.values().data();
  T* pc = c.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = pc + i * n;
    const T* arow = pa + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      const T* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// c = a^T * b without materializing the transpose.
template <std::floating_point T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn shape mismatch: " + to_string(a.shape()) + "^T * " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Tensor<T> c(Shape{m, n});
  const T* pa = a.values().data();
  const T* pb = b.values().data();
  T* pc = c.values().data();
  for (std::size_t kk = 0; kk < k; ++kk) {
    const T* arow = pa + kk * m;
    const T* brow = pb + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      T* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// c = a * b^T without materializing the transpose.
template <std::floating_point T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt shape mismatch: " + to_string(a.shape()) + " * " +
                         to_string(b.shape()) + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor<T> c(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const auto arow = a.row_span(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto brow = b.row_span(j);
      T acc = T(0);
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      c(i, j) = acc;
    }
  }
  return c;
}

}  // namespace kernel
}  // namespace pcmeta
