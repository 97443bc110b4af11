#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "core/parameter.hpp"
#include "core/tensor.hpp"

namespace lapis {

template <typename T>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Records operations in execution order so that the reverse sweep visits
/// each node once, after all of its consumers. Single-threaded.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  /// Binds a parameter; its gradient is accumulated into `p.grad` by
  /// backward(). Repeated calls on one tape return the same node.
  Var<T> parameter(Parameter<T>& p);

  /// Appends an operation result. `fn` is dropped when no input needs a
  /// gradient or recording is disabled.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn);
  Var<T> record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn fn);

  const Tensor<T>& value(std::uint32_t id) const { return nodes_[id].value; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator of a node, zero-initialised on first access.
  Tensor<T>& grad_buffer(std::uint32_t id);
  bool has_grad(std::uint32_t id) const { return nodes_[id].has_grad; }
  /// Gradient of the last backward() with respect to `v`.
  const Tensor<T>& grad(Var<T> v) const;

  /// Reverse sweep from a scalar. A tape may be swept once; call reset()
  /// before recording a new graph.
  void backward(Var<T> loss);
  void reset();

  void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn fn;
    Parameter<T>* sink = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var<T> push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> bound_;
  bool grad_enabled_ = true;
  bool consumed_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

/// Temporarily disables recording on a tape.
template <typename T>
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape<T>& tape) : tape_(tape), previous_(tape.grad_enabled()) {
    tape_.set_grad_enabled(false);
  }
  ~NoGradGuard() { tape_.set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<T>& tape_;
  bool previous_;
};

namespace ad {

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);

// Elementwise. Operands must have equal shapes, or one of them must hold a
// single value.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> tanh(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
/// Exact form x * Phi(x).
template <typename T> Var<T> gelu(Var<T> a);
template <typename T> Var<T> exp(Var<T> a);
template <typename T> Var<T> square(Var<T> a);
template <typename T> Var<T> scale(Var<T> a, T factor);

// Row-vector operands: `row` is 1 x cols and applies to every row of `a`.
template <typename T> Var<T> add_row(Var<T> a, Var<T> row);
template <typename T> Var<T> mul_row(Var<T> a, Var<T> row);
/// x * w + b with b a 1 x out row.
template <typename T> Var<T> affine(Var<T> x, Var<T> w, Var<T> b);

template <typename T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end);
template <typename T> Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end);
template <typename T> Var<T> concat_cols(std::span<const Var<T>> parts);
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);
/// Repeats a 1 x n row `count` times.
template <typename T> Var<T> tile_rows(Var<T> row, std::size_t count);

template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
/// Column means, 1 x cols.
template <typename T> Var<T> mean_rows(Var<T> a);
/// Per-row standardisation (x - mean) / sqrt(var + eps), population variance.
template <typename T> Var<T> layer_norm(Var<T> a, T eps);

}  // namespace ad
}  // namespace lapis
