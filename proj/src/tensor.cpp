// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "seqconv/errors.hpp"

namespace seqconv {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  return os.str();
}

template <typename T>
void TensorNode<T>::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), T{0});
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad) : node_(std::make_shared<TensorNode<T>>()) {
  for (auto e : shape) {
    if (e == 0) throw InvalidArgument("tensor extents must be positive, got " + shape_to_string(shape));
  }
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<TensorNode<T>>()) {
  if (shape_numel(shape) != values.size()) {
    throw InvalidArgument("shape " + shape_to_string(shape) + " does not match " +
                          std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  set_requires_grad(requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw InvalidArgument("item() on tensor of shape " + shape_to_string(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->ensure_grad();
  } else {
    node_->grad.clear();
  }
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor<T>(node_->shape, node_->value);
}

namespace {
template <typename T>
thread_local Tape<T>* g_active_tape = nullptr;
}  // namespace

template <typename T>
Tape<T>* Tape<T>::active() {
  return g_active_tape<T>;
}

template <typename T>
Tape<T>::~Tape() {
  for (auto& e : entries_) {
    if (e.output->producer == this) e.output->producer = nullptr;
  }
}

template <typename T>
void Tape<T>::record(std::vector<NodePtr> inputs, const NodePtr& output, std::function<void()> rule) {
  output->requires_grad = true;
  output->producer = this;
  entries_.push_back(Entry{std::move(inputs), output, std::move(rule)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.node()->producer != this) {
    throw InvalidState("backward: tensor was not produced on this tape");
  }
  if (loss.numel() != 1) {
    throw InvalidArgument("backward: loss must be a scalar, got shape " + shape_to_string(loss.shape()));
  }
  std::unordered_set<const TensorNode<T>*> reset;
  auto clear = [&](const NodePtr& n) {
    if (n->requires_grad && reset.insert(n.get()).second) {
      n->ensure_grad();
      std::fill(n->grad.begin(), n->grad.end(), T{0});
    }
  };
  for (auto& e : entries_) {
    clear(e.output);
    for (auto& in : e.inputs) clear(in);
  }
  loss.node()->grad[0] = T{1};
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->rule();
}

template <typename T>
TapeGuard<T>::TapeGuard(Tape<T>& tape) : previous_(g_active_tape<T>) {
  g_active_tape<T> = &tape;
}

template <typename T>
TapeGuard<T>::~TapeGuard() {
  g_active_tape<T> = previous_;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.node()->producer == nullptr) {
    throw InvalidState("backward: tensor is not on any tape");
  }
  loss.node()->producer->backward(loss);
}

template struct TensorNode<float>;
template struct TensorNode<double>;
template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeGuard<float>;
template class TapeGuard<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace seqconv
