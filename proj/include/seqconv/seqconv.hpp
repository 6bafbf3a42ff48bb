// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqconv/modules.hpp"

namespace seqconv {

enum class Aggregation { dense, windowed };
enum class Transform { basic, bottleneck };

const char* to_string(Aggregation a);
const char* to_string(Transform t);

/// One sequentially aggregated layer: `groups` transforms of `growth` output
/// channels each, every transform reading the concatenation of the layer
/// input and the outputs of the groups before it (dense), or only the most
/// recent `window` groups of that sequence (windowed).
struct SeqConvConfig {
  int groups = 1;  // g
  int growth = 1;  // k, channels per group
  Aggregation aggregation = Aggregation::dense;
  /// Window length in groups (g'); 0 selects the input's own group count.
  int window = 0;
  Transform transform = Transform::basic;
  /// Subgroups of the bottleneck 3x3 conv (c); 1 means ungrouped.
  int subgroups = 1;
  /// ReLU at the end of each transform. Residual blocks switch it off for
  /// their second layer so the branch ends linearly.
  bool final_activation = true;

  int output_width() const { return groups * growth; }
  bool operator==(const SeqConvConfig&) const = default;
};

/// Throws InvalidArgument unless cfg is usable on an input of `in_width`.
void validate(const SeqConvConfig& cfg, std::size_t in_width);

/// g' actually used (resolves the 0 default).
int effective_window(const SeqConvConfig& cfg, std::size_t in_width);

/// Channels of the aggregate [x'_0, x_1, ..., x_{i-1}] read by group i
/// (1-based); always a contiguous range ending at the newest group.
struct GroupView {
  std::size_t begin = 0;
  std::size_t count = 0;
};
GroupView group_view(const SeqConvConfig& cfg, std::size_t in_width, int i);

/// Window mask of group i over source positions 1-m .. i-1, where m is the
/// number of k-wide groups in the layer input: entry j is 1 iff
/// i - window <= j <= i - 1.
std::vector<int> window_mask(int i, int window, int input_groups);

struct ParamShape {
  std::string role;  // e.g. "group2.conv3x3.kernel"
  Shape shape;
};

/// Exact shapes of every conv kernel and BN affine vector, group-major.
std::vector<ParamShape> param_shapes(const SeqConvConfig& cfg, std::size_t in_width);
std::uint64_t param_count(const SeqConvConfig& cfg, std::size_t in_width);
/// Multiply-accumulates for one sample at spatial size h x w.
std::uint64_t layer_macs(const SeqConvConfig& cfg, std::size_t in_width, std::size_t h, std::size_t w);

/// Transformation F_i: Conv3x3-BN-ReLU (basic) or
/// Conv1x1-BN-ReLU-Conv3x3(c subgroups)-BN-ReLU (bottleneck).
template <typename T>
class GroupTransform {
 public:
  GroupTransform() = default;
  GroupTransform(const SeqConvConfig& cfg, std::size_t in_width);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);

  /// Units in order; one for basic, two for bottleneck.
  std::vector<ConvUnit<T>>& units() { return units_; }
  const std::vector<ConvUnit<T>>& units() const { return units_; }
  /// The conv that reads the aggregated input.
  const Conv2d<T>& reader() const { return units_.front().conv(); }
  std::size_t in_width() const { return in_width_; }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
  void collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out);

 private:
  std::vector<ConvUnit<T>> units_;
  std::size_t in_width_ = 0;
};

/// Dense (SeqConv) or windowed (WSeqConv) layer. Output is the concatenation
/// of all group outputs, g * k channels; the layer input is aggregated into
/// every view but never part of the output.
template <typename T>
class SeqConvLayer {
 public:
  SeqConvLayer() = default;
  SeqConvLayer(SeqConvConfig cfg, std::size_t in_width);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);

  /// Per-group outputs of the most recent forward pass.
  const std::vector<Tensor<T>>& last_group_outputs() const { return outputs_; }

  const SeqConvConfig& config() const { return cfg_; }
  std::size_t in_width() const { return in_width_; }
  std::size_t out_width() const { return static_cast<std::size_t>(cfg_.output_width()); }
  std::vector<GroupTransform<T>>& groups() { return groups_; }
  const std::vector<GroupTransform<T>>& groups() const { return groups_; }

  /// Zero every conv kernel and reset BN affine parameters.
  void zero_init();

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
  void collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out);

 private:
  SeqConvConfig cfg_;
  std::size_t in_width_ = 0;
  std::vector<GroupTransform<T>> groups_;
  std::vector<Tensor<T>> outputs_;
};

/// Stand-alone grouped 3x3 convolution used inside bottleneck transforms:
/// `width` -> `width` channels in `subgroups` independent groups.
template <typename T>
Tensor<T> subgrouped_3x3(const Tensor<T>& input, const Tensor<T>& kernel, int subgroups);

extern template class GroupTransform<float>;
extern template class GroupTransform<double>;
extern template class SeqConvLayer<float>;
extern template class SeqConvLayer<double>;

}  // namespace seqconv
