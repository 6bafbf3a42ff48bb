// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <string>
#include <vector>

#include "seqconv/ops.hpp"

namespace seqconv {

enum class ParamKind { conv_kernel, bn_gamma, bn_beta, fc_weight, fc_bias };

const char* to_string(ParamKind kind);

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
  ParamKind kind;
};

template <typename T>
struct NamedStats {
  std::string name;
  BatchNormStats<T>* stats;
};

/// Everything a forward pass needs besides the input.
struct ForwardContext {
  Mode mode = Mode::train;
  Rng* rng = nullptr;  // required only when dropout is active
  double dropout = 0.0;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, Conv2dGeometry geo);

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, kernel_, geo_); }

  Tensor<T>& kernel() { return kernel_; }
  const Tensor<T>& kernel() const { return kernel_; }
  const Conv2dGeometry& geometry() const { return geo_; }
  std::size_t in_channels() const { return kernel_.dim(1) * static_cast<std::size_t>(geo_.groups); }
  std::size_t out_channels() const { return kernel_.dim(0); }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;

 private:
  Tensor<T> kernel_;
  Conv2dGeometry geo_;
};

template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);

  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return batch_norm(x, gamma_, beta_, stats_, mode); }

  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  const Tensor<T>& gamma() const { return gamma_; }
  const Tensor<T>& beta() const { return beta_; }
  BatchNormStats<T>& stats() { return stats_; }
  const BatchNormStats<T>& stats() const { return stats_; }
  /// gamma = 1, beta = 0
  void reset_affine();

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
  void collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out);

 private:
  Tensor<T> gamma_;
  Tensor<T> beta_;
  BatchNormStats<T> stats_;
};

/// Conv -> BN -> optional ReLU, the unit every transform is built from.
template <typename T>
class ConvUnit {
 public:
  ConvUnit() = default;
  ConvUnit(std::size_t in, std::size_t out, std::size_t kernel, Conv2dGeometry geo, bool activation = true);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);

  Conv2d<T>& conv() { return conv_; }
  const Conv2d<T>& conv() const { return conv_; }
  BatchNorm<T>& bn() { return bn_; }
  const BatchNorm<T>& bn() const { return bn_; }
  bool activation() const { return activation_; }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
  void collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out);

 private:
  Conv2d<T> conv_;
  BatchNorm<T> bn_;
  bool activation_ = true;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out);

  Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight_, bias_); }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;

 private:
  Tensor<T> weight_;  // in x out
  Tensor<T> bias_;
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class BatchNorm<float>;
extern template class BatchNorm<double>;
extern template class ConvUnit<float>;
extern template class ConvUnit<double>;
extern template class Linear<float>;
extern template class Linear<double>;

}  // namespace seqconv
