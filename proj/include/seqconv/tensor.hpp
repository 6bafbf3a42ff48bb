// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace seqconv {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

template <typename T>
class Tape;

/// Storage shared by all handles to one tensor.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized like value iff requires_grad
  bool requires_grad = false;
  Tape<T>* producer = nullptr;  // tape that recorded this as an output

  void ensure_grad();
};

/// Dense row-major array (NCHW for activations, OIHW for conv kernels).
///
/// Tensor is a handle: copies alias the same storage, like a framework
/// tensor. Ops never mutate their inputs; use clone() for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T v, bool requires_grad = false) { return Tensor(Shape{1}, v, requires_grad); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> values() { return node_->value; }
  std::span<const T> values() const { return node_->value; }
  T item() const;
  T& operator[](std::size_t i) { return node_->value[i]; }
  const T& operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  /// Gradient values; empty span unless requires_grad.
  std::span<T> grad() { return node_->grad; }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad();

  /// Deep copy of the values, detached from any tape.
  Tensor clone() const;
  /// Convert precision; result is detached.
  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(node_->value[i]);
    return Tensor<U>(shape(), std::move(out));
  }

  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Ordered record of differentiable operations for reverse-mode autodiff.
///
/// Ops executed while a tape is active (see TapeGuard) and having at least one
/// input with requires_grad append an entry here. backward() replays the
/// entries in reverse, each exactly once.
template <typename T>
class Tape {
 public:
  using NodePtr = std::shared_ptr<TensorNode<T>>;

  Tape() = default;
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Active tape of the calling thread, or nullptr.
  static Tape* active();

  /// Register `output` as produced by an op over `inputs`. `rule` reads
  /// output->grad and accumulates into the inputs' grads.
  void record(std::vector<NodePtr> inputs, const NodePtr& output, std::function<void()> rule);

  /// Populate d(loss)/d(t) for every requires_grad tensor reachable from the
  /// scalar `loss`. Leaf gradients are reset before accumulation.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void()> rule;
  };
  std::vector<Entry> entries_;
};

/// Makes a tape the thread's active tape for the guard's lifetime.
template <typename T>
class TapeGuard {
 public:
  explicit TapeGuard(Tape<T>& tape);
  ~TapeGuard();
  TapeGuard(const TapeGuard&) = delete;
  TapeGuard& operator=(const TapeGuard&) = delete;

 private:
  Tape<T>* previous_;
};

/// Convenience: backward on the tape that produced `loss`.
template <typename T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class TapeGuard<float>;
extern template class TapeGuard<double>;

}  // namespace seqconv
