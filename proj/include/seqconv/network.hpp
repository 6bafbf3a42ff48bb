// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seqconv/builder.hpp"

namespace seqconv {

/// A network instantiated from a NetworkSpec. Parameters start zeroed (BN at
/// gamma 1, beta 0); call init_weights before training.
template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec);

  /// x: N x C x H x W -> logits N x classes.
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);

  const NetworkSpec& spec() const { return spec_; }

  /// All learnable tensors in forward order with stable hierarchical names,
  /// e.g. "stage2/block0/layer1.group3.conv3x3.bn.gamma".
  std::vector<NamedParam<T>> parameters() const;
  /// Running statistics of every batch-norm layer, same order and prefixes.
  std::vector<NamedStats<T>> batch_norm_stats();

  /// Aggregated layer by plan path ("stage1/entry", "stage2/downsample/extension",
  /// "stage3/block0/layer2"). Throws InvalidArgument listing valid paths.
  SeqConvLayer<T>& seq_layer(const std::string& path);
  std::vector<std::string> seq_layer_paths() const;

  std::vector<ResidualBlock<T>*> residual_blocks();

  std::uint64_t parameter_count() const;

 private:
  struct Stage {
    std::optional<SeqConvLayer<T>> entry;
    std::optional<DownsampleBlock<T>> downsample;
    std::vector<ResidualBlock<T>> blocks;
  };

  NetworkSpec spec_;
  std::vector<ConvUnit<T>> stem_;
  std::vector<Stage> stages_;
  std::optional<ConvUnit<T>> head_conv_;
  Linear<T> fc_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace seqconv
