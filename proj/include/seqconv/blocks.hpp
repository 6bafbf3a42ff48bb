// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include "seqconv/seqconv.hpp"

namespace seqconv {

/// Two aggregated layers of equal width wrapped by an identity shortcut.
struct ResidualBlockSpec {
  std::size_t width = 0;
  SeqConvConfig layer1;
  SeqConvConfig layer2;
  bool zero_init_layer2 = true;

  /// Both layers at `width` with k = growth; layer2 ends without ReLU.
  static ResidualBlockSpec make(std::size_t width, int growth, int subgroups, Transform transform,
                                Aggregation aggregation = Aggregation::windowed);
  void validate() const;
};

/// Extension layer adding channels, concatenation after the block input, and
/// a grouped stride-2 3x3 downsizing conv (+BN+ReLU) over the result.
struct DownsampleBlockSpec {
  std::size_t in_width = 0;
  SeqConvConfig extension;
  int downsize_groups = 1;

  std::size_t added_width() const { return static_cast<std::size_t>(extension.output_width()); }
  std::size_t out_width() const { return in_width + added_width(); }
  void validate() const;
};

template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  explicit ResidualBlock(const ResidualBlockSpec& spec);

  /// y = x + layer2(layer1(x)); dropout (ctx.dropout) precedes each layer.
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);

  SeqConvLayer<T>& layer1() { return layer1_; }
  SeqConvLayer<T>& layer2() { return layer2_; }
  const SeqConvLayer<T>& layer1() const { return layer1_; }
  const SeqConvLayer<T>& layer2() const { return layer2_; }
  const ResidualBlockSpec& spec() const { return spec_; }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
  void collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out);

 private:
  ResidualBlockSpec spec_;
  SeqConvLayer<T> layer1_;
  SeqConvLayer<T> layer2_;
};

template <typename T>
class DownsampleBlock {
 public:
  DownsampleBlock() = default;
  explicit DownsampleBlock(const DownsampleBlockSpec& spec);

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, bool dropout_before_extension = true);

  SeqConvLayer<T>& extension() { return extension_; }
  const SeqConvLayer<T>& extension() const { return extension_; }
  ConvUnit<T>& downsize() { return downsize_; }
  const DownsampleBlockSpec& spec() const { return spec_; }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
  void collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out);

 private:
  DownsampleBlockSpec spec_;
  SeqConvLayer<T> extension_;
  ConvUnit<T> downsize_;
};

/// Zero the second layer's kernels and reset its BN affine parameters; the
/// block then computes the identity. Idempotent; layer1 is left untouched.
template <typename T>
void zero_init_block(ResidualBlock<T>& block);

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const ForwardContext& ctx);

extern template class ResidualBlock<float>;
extern template class ResidualBlock<double>;
extern template class DownsampleBlock<float>;
extern template class DownsampleBlock<double>;

}  // namespace seqconv
