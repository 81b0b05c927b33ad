#pragma once

// Reverse-mode automatic differentiation over rank-2 tensors.
//
// A Tape records every operation in creation order, so node ids are already a
// topological order. Backward rules are themselves expressed with taped
// operations: with `create_graph = true` the gradient computation is recorded
// too and can be differentiated again, which is what second-order
// meta-gradients need. With `create_graph = false` the rules run with
// recording switched off and produce constants.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pcmeta/error.hpp"
#include "pcmeta/tensor.hpp"

namespace pcmeta::ad {

template <std::floating_point T>
class Tape;

/// Lightweight handle to a node on a Tape. Copies refer to the same node.
template <std::floating_point T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }
  [[nodiscard]] std::size_t id() const noexcept { return id_; }
  [[nodiscard]] Tape<T>& tape() const noexcept { return *tape_; }
  [[nodiscard]] const Tensor<T>& value() const { return tape_->value(id_); }
  [[nodiscard]] const Shape& shape() const { return value().shape(); }
  [[nodiscard]] bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <std::floating_point T>
class Tape {
 public:
  /// Maps the upstream gradient (and the node's own handle) to one gradient
  /// per parent. Entries may be invalid for parents that need no gradient.
  using BackwardFn = std::function<std::vector<Var<T>>(const Var<T>& grad, const Var<T>& self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), requires_grad, {}, {}});
    return Var<T>(this, nodes_.size() - 1);
  }
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn backward) {
    bool needs = false;
    if (recording_) {
      for (const auto& p : parents) {
        if (&p.tape() != this) throw ContractError("operands recorded on different tapes");
        needs = needs || requires_grad(p.id());
      }
    }
    Node node{std::move(value), needs, {}, {}};
    if (needs) {
      node.parents.reserve(parents.size());
      for (const auto& p : parents) node.parents.push_back(p.id());
      node.backward = std::move(backward);
    }
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
  }

  [[nodiscard]] const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  [[nodiscard]] const std::vector<std::size_t>& parents(std::size_t id) const {
    return nodes_.at(id).parents;
  }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] bool recording() const noexcept { return recording_; }

  /// Suspends recording for its lifetime; results become constants.
  class NoGradGuard {
   public:
    explicit NoGradGuard(Tape& tape) : tape_(tape), previous_(tape.recording_) {
      tape_.recording_ = false;
    }
    ~NoGradGuard() { tape_.recording_ = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    Tape& tape_;
    bool previous_;
  };

  /// Gradients of the scalar `loss` with respect to each of `wrt`. Inputs the
  /// loss does not depend on get zero gradients.
  std::vector<Var<T>> grad(const Var<T>& loss, std::span<const Var<T>> wrt, bool create_graph = false);

 private:
  struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  bool recording_ = true;
};

// ---------------------------------------------------------------------------
// Operations

namespace detail {

template <std::floating_point T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
  if (!a.valid() || !b.valid()) throw ContractError("operation on an invalid Var");
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

template <std::floating_point T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

template <std::floating_point T, class F>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, F f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace detail

template <std::floating_point T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape("add", a, b);
  return tape.record(detail::zip(a.value(), b.value(), [](T x, T y) { return x + y; }), {a, b},
                     [](const Var<T>& g, const Var<T>&) { return std::vector<Var<T>>{g, g}; });
}

template <std::floating_point T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  return a.tape().record(std::move(out), {a}, [factor](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{scale(g, factor)};
  });
}

template <std::floating_point T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  return tape.record(detail::zip(a.value(), b.value(), [](T x, T y) { return x - y; }), {a, b},
                     [b](const Var<T>& g, const Var<T>&) {
                       return std::vector<Var<T>>{g, b.requires_grad() ? scale(g, T(-1)) : Var<T>{}};
                     });
}

template <std::floating_point T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape("mul", a, b);
  return tape.record(detail::zip(a.value(), b.value(), [](T x, T y) { return x * y; }), {a, b},
                     [a, b](const Var<T>& g, const Var<T>&) {
                       return std::vector<Var<T>>{a.requires_grad() ? mul(g, b) : Var<T>{},
                                                  b.requires_grad() ? mul(g, a) : Var<T>{}};
                     });
}

template <std::floating_point T>
Var<T> square(const Var<T>& a) {
  return mul(a, a);
}

template <std::floating_point T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <std::floating_point T>
Var<T> matmul_tn(const Var<T>& a, const Var<T>& b);

/// a[m x k] * b[k x n].
template <std::floating_point T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b);
  return tape.record(kernel::matmul(a.value(), b.value()), {a, b},
                     [a, b](const Var<T>& g, const Var<T>&) {
                       return std::vector<Var<T>>{a.requires_grad() ? matmul_nt(g, b) : Var<T>{},
                                                  b.requires_grad() ? matmul_tn(a, g) : Var<T>{}};
                     });
}

/// a * b^T.
template <std::floating_point T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b);
  return tape.record(kernel::matmul_nt(a.value(), b.value()), {a, b},
                     [a, b](const Var<T>& g, const Var<T>&) {
                       return std::vector<Var<T>>{a.requires_grad() ? matmul(g, b) : Var<T>{},
                                                  b.requires_grad() ? matmul_tn(g, a) : Var<T>{}};
                     });
}

/// a^T * b.
template <std::floating_point T>
Var<T> matmul_tn(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b);
  return tape.record(kernel::matmul_tn(a.value(), b.value()), {a, b},
                     [a, b](const Var<T>& g, const Var<T>&) {
                       return std::vector<Var<T>>{a.requires_grad() ? matmul_nt(b, g) : Var<T>{},
                                                  b.requires_grad() ? matmul(a, g) : Var<T>{}};
                     });
}

template <std::floating_point T>
Var<T> broadcast_rows(const Var<T>& row, std::size_t rows);

/// Column sums: [m x n] -> [1 x n].
template <std::floating_point T>
Var<T> colsum(const Var<T>& a) {
  const auto& v = a.value();
  Tensor<T> out(Shape{1, v.cols()});
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out[c] += v(r, c);
  const std::size_t rows = v.rows();
  return a.tape().record(std::move(out), {a}, [rows](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{broadcast_rows(g, rows)};
  });
}

/// Repeats a [1 x n] row `rows` times.
template <std::floating_point T>
Var<T> broadcast_rows(const Var<T>& row, std::size_t rows) {
  const auto& v = row.value();
  if (v.rows() != 1) throw DimensionError("broadcast_rows expects a row, got " + to_string(v.shape()));
  Tensor<T> out(Shape{rows, v.cols()});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, c) = v[c];
  return row.tape().record(std::move(out), {row}, [](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{colsum(g)};
  });
}

template <std::floating_point T>
Var<T> broadcast_cols(const Var<T>& column, std::size_t cols);

/// Row sums: [m x n] -> [m x 1].
template <std::floating_point T>
Var<T> rowsum(const Var<T>& a) {
  const auto& v = a.value();
  Tensor<T> out(Shape{v.rows(), 1});
  for (std::size_t r = 0; r < v.rows(); ++r) {
    T acc = T(0);
    for (std::size_t c = 0; c < v.cols(); ++c) acc += v(r, c);
    out[r] = acc;
  }
  const std::size_t cols = v.cols();
  return a.tape().record(std::move(out), {a}, [cols](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{broadcast_cols(g, cols)};
  });
}

/// Repeats an [m x 1] column `cols` times.
template <std::floating_point T>
Var<T> broadcast_cols(const Var<T>& column, std::size_t cols) {
  const auto& v = column.value();
  if (v.cols() != 1) {
    throw DimensionError("broadcast_cols expects a column, got " + to_string(v.shape()));
  }
  Tensor<T> out(Shape{v.rows(), cols});
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = v[r];
  return column.tape().record(std::move(out), {column}, [](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{rowsum(g)};
  });
}

template <std::floating_point T>
Var<T> broadcast_scalar(const Var<T>& s, Shape shape);

template <std::floating_point T>
Var<T> sum_all(const Var<T>& a) {
  T acc = T(0);
  for (T v : a.value().values()) acc += v;
  const Shape shape = a.shape();
  return a.tape().record(Tensor<T>::scalar(acc), {a}, [shape](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{broadcast_scalar(g, shape)};
  });
}

template <std::floating_point T>
Var<T> broadcast_scalar(const Var<T>& s, Shape shape) {
  return s.tape().record(Tensor<T>(shape, s.value().item()), {s}, [](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{sum_all(g)};
  });
}

/// a * s for a 1x1 Var `s`.
template <std::floating_point T>
Var<T> mul_scalar(const Var<T>& a, const Var<T>& s) {
  auto& tape = detail::same_tape(a, s);
  const T factor = s.value().item();
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  return tape.record(std::move(out), {a, s}, [a, s](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{a.requires_grad() ? mul_scalar(g, s) : Var<T>{},
                               s.requires_grad() ? sum_all(mul(g, a)) : Var<T>{}};
  });
}

/// a[m x n] + row[1 x n] broadcast over rows.
template <std::floating_point T>
Var<T> add_rowvec(const Var<T>& a, const Var<T>& row) {
  auto& tape = detail::same_tape(a, row);
  const auto& av = a.value();
  const auto& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_rowvec shape mismatch: " + to_string(av.shape()) + " + " +
                         to_string(rv.shape()));
  }
  Tensor<T> out = av;
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) += rv[c];
  return tape.record(std::move(out), {a, row}, [row](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{g, row.requires_grad() ? colsum(g) : Var<T>{}};
  });
}

/// Elementwise max(x, 0). The subgradient at exactly 0 is taken as 0.
template <std::floating_point T>
Var<T> relu(const Var<T>& a) {
  const auto& v = a.value();
  Tensor<T> out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > T(0) ? v[i] : T(0);
  return a.tape().record(std::move(out), {a}, [a](const Var<T>& g, const Var<T>&) {
    const auto& x = a.value();
    Tensor<T> mask(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) mask[i] = x[i] > T(0) ? T(1) : T(0);
    return std::vector<Var<T>>{mul(g, a.tape().constant(std::move(mask)))};
  });
}

template <std::floating_point T>
Var<T> scatter_rows(const Var<T>& values, std::vector<std::size_t> index, std::size_t rows);

/// out[0, f] = a[index[f], f].
template <std::floating_point T>
Var<T> gather_rows(const Var<T>& a, std::vector<std::size_t> index) {
  const auto& v = a.value();
  if (index.size() != v.cols()) throw DimensionError("gather_rows index length mismatch");
  Tensor<T> out(Shape{1, v.cols()});
  for (std::size_t f = 0; f < v.cols(); ++f) out[f] = v(index[f], f);
  const std::size_t rows = v.rows();
  return a.tape().record(std::move(out), {a},
                         [index = std::move(index), rows](const Var<T>& g, const Var<T>&) {
                           return std::vector<Var<T>>{scatter_rows(g, index, rows)};
                         });
}

/// Adjoint of gather_rows: a [rows x F] zero tensor with out[index[f], f] = values[0, f].
template <std::floating_point T>
Var<T> scatter_rows(const Var<T>& values, std::vector<std::size_t> index, std::size_t rows) {
  const auto& v = values.value();
  if (v.rows() != 1 || index.size() != v.cols()) throw DimensionError("scatter_rows shape mismatch");
  Tensor<T> out(Shape{rows, v.cols()});
  for (std::size_t f = 0; f < v.cols(); ++f) out(index[f], f) = v[f];
  return values.tape().record(std::move(out), {values},
                              [index = std::move(index)](const Var<T>& g, const Var<T>&) {
                                return std::vector<Var<T>>{gather_rows(g, index)};
                              });
}

template <std::floating_point T>
struct Pooled {
  Var<T> values;                   ///< [1 x F]
  std::vector<std::size_t> argmax;  ///< winning point per feature
};

/// Per-feature maximum over the point (row) axis. Ties go to the lowest row,
/// and the backward pass routes each feature's gradient to that row only.
template <std::floating_point T>
Pooled<T> max_over_points(const Var<T>& a) {
  const auto& v = a.value();
  if (v.rows() == 0) throw EmptyInputError("max_over_points on zero points");
  std::vector<std::size_t> argmax(v.cols(), 0);
  for (std::size_t r = 1; r < v.rows(); ++r)
    for (std::size_t f = 0; f < v.cols(); ++f)
      if (v(r, f) > v(argmax[f], f)) argmax[f] = r;
  return {gather_rows(a, argmax), argmax};
}

template <std::floating_point T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t count);

/// Embeds `a` into a zero tensor of `total` columns starting at `begin`.
template <std::floating_point T>
Var<T> pad_cols(const Var<T>& a, std::size_t begin, std::size_t total) {
  const auto& v = a.value();
  if (begin + v.cols() > total) throw DimensionError("pad_cols out of range");
  Tensor<T> out(Shape{v.rows(), total});
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, begin + c) = v(r, c);
  const std::size_t count = v.cols();
  return a.tape().record(std::move(out), {a}, [begin, count](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{slice_cols(g, begin, count)};
  });
}

template <std::floating_point T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t count) {
  const auto& v = a.value();
  if (begin + count > v.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + to_string(v.shape()));
  }
  Tensor<T> out(Shape{v.rows(), count});
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
  const std::size_t total = v.cols();
  return a.tape().record(std::move(out), {a}, [begin, total](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{pad_cols(g, begin, total)};
  });
}

template <std::floating_point T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols row mismatch: " + to_string(av.shape()) + " | " +
                         to_string(bv.shape()));
  }
  Tensor<T> out(Shape{av.rows(), av.cols() + bv.cols()});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c);
    for (std::size_t c = 0; c < bv.cols(); ++c) out(r, av.cols() + c) = bv(r, c);
  }
  const std::size_t left = av.cols(), right = bv.cols();
  return tape.record(std::move(out), {a, b}, [a, b, left, right](const Var<T>& g, const Var<T>&) {
    return std::vector<Var<T>>{a.requires_grad() ? slice_cols(g, 0, left) : Var<T>{},
                               b.requires_grad() ? slice_cols(g, left, right) : Var<T>{}};
  });
}

template <std::floating_point T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  const auto& v = a.value();
  if (shape.size() != v.size()) {
    throw DimensionError("reshape " + to_string(v.shape()) + " -> " + to_string(shape));
  }
  const Shape original = v.shape();
  return a.tape().record(Tensor<T>(shape, std::vector<T>(v.values().begin(), v.values().end())), {a},
                         [original](const Var<T>& g, const Var<T>&) {
                           return std::vector<Var<T>>{reshape(g, original)};
                         });
}

namespace detail {

template <std::floating_point T>
Tensor<T> softmax_rows_value(const Tensor<T>& z) {
  Tensor<T> out(z.shape());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < z.cols(); ++c) mx = std::max(mx, z(r, c));
    T total = T(0);
    for (std::size_t c = 0; c < z.cols(); ++c) {
      out(r, c) = std::exp(z(r, c) - mx);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < z.cols(); ++c) out(r, c) /= total;
  }
  return out;
}

}  // namespace detail

template <std::floating_point T>
Var<T> softmax_rows(const Var<T>& z) {
  return z.tape().record(detail::softmax_rows_value(z.value()), {z},
                         [](const Var<T>& g, const Var<T>& self) {
                           const std::size_t cols = self.shape().cols;
                           auto inner = broadcast_cols(rowsum(mul(g, self)), cols);
                           return std::vector<Var<T>>{mul(self, sub(g, inner))};
                         });
}

/// Mean over rows of -log softmax(logits)[label]. Labels must lie in [0, C).
template <std::floating_point T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const int> labels) {
  const auto& z = logits.value();
  if (labels.size() != z.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         to_string(z.shape()) + " logits");
  }
  if (z.rows() == 0) throw EmptyInputError("cross_entropy on zero points");
  const std::size_t classes = z.cols();
  Tensor<T> onehot(z.shape());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] < 0 || static_cast<std::size_t>(labels[p]) >= classes) {
      throw ValidationError("cross_entropy: label " + std::to_string(labels[p]) + " at point " +
                            std::to_string(p) + " outside [0, " + std::to_string(classes) + ")");
    }
    onehot(p, static_cast<std::size_t>(labels[p])) = T(1);
  }
  T total = T(0);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, z(r, c));
    T sum = T(0);
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z(r, c) - mx);
    total += mx + std::log(sum) - z(r, static_cast<std::size_t>(labels[r]));
  }
  const T inv_points = T(1) / static_cast<T>(z.rows());
  return logits.tape().record(
      Tensor<T>::scalar(total * inv_points), {logits},
      [logits, onehot = std::move(onehot), inv_points](const Var<T>& g, const Var<T>&) {
        auto& tape = logits.tape();
        auto residual = sub(softmax_rows(logits), tape.constant(onehot));
        return std::vector<Var<T>>{mul_scalar(scale(residual, inv_points), g)};
      });
}

// ---------------------------------------------------------------------------

template <std::floating_point T>
std::vector<Var<T>> Tape<T>::grad(const Var<T>& loss, std::span<const Var<T>> wrt, bool create_graph) {
  if (!loss.valid() || &loss.tape() != this) throw ContractError("loss is not recorded on this tape");
  if (loss.shape() != Shape{1, 1}) {
    throw ContractError("backward needs a scalar loss, got " + to_string(loss.shape()));
  }
  std::optional<NoGradGuard> guard;
  if (!create_graph) guard.emplace(*this);

  std::vector<Var<T>> acc(loss.id() + 1);
  acc[loss.id()] = constant(Tensor<T>::scalar(T(1)));
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (!acc[id].valid()) continue;
    const Node& node = nodes_[id];
    if (!node.backward) continue;
    const std::vector<Var<T>> parent_grads = node.backward(acc[id], Var<T>(this, id));
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      const std::size_t p = node.parents[i];
      if (i >= parent_grads.size() || !parent_grads[i].valid() || !nodes_[p].requires_grad) continue;
      acc[p] = acc[p].valid() ? add(acc[p], parent_grads[i]) : parent_grads[i];
    }
  }

  std::vector<Var<T>> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id() < acc.size() && acc[w.id()].valid()) {
      out.push_back(acc[w.id()]);
    } else {
      out.push_back(constant(Tensor<T>(w.shape())));
    }
  }
  return out;
}

}  // namespace pcmeta::ad
