// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/seqconv.hpp"

#include <algorithm>

#include "seqconv/errors.hpp"

namespace seqconv {

const char* to_string(Aggregation a) { return a == Aggregation::dense ? "dense" : "windowed"; }
const char* to_string(Transform t) { return t == Transform::basic ? "basic" : "bottleneck"; }

void validate(const SeqConvConfig& cfg, std::size_t in_width) {
  if (cfg.groups < 1) throw InvalidArgument("seqconv: group count g must be >= 1, got " + std::to_string(cfg.groups));
  if (cfg.growth < 1) throw InvalidArgument("seqconv: growth k must be >= 1, got " + std::to_string(cfg.growth));
  if (cfg.subgroups < 1) throw InvalidArgument("seqconv: subgroups c must be >= 1");
  if (cfg.growth % cfg.subgroups != 0) {
    throw InvalidArgument("seqconv: growth k=" + std::to_string(cfg.growth) + " not divisible by subgroups c=" +
                          std::to_string(cfg.subgroups));
  }
  if (cfg.subgroups > 1 && cfg.transform == Transform::basic) {
    throw InvalidArgument("seqconv: subgroups apply only to the bottleneck transform");
  }
  if (in_width == 0) throw InvalidArgument("seqconv: input width must be positive");
  if (cfg.aggregation == Aggregation::windowed) {
    if (in_width % static_cast<std::size_t>(cfg.growth) != 0) {
      throw InvalidArgument("wseqconv: input width " + std::to_string(in_width) +
                            " cannot be decomposed into groups of k=" + std::to_string(cfg.growth) +
                            " channels (the windowed input is read as in_width/k preceding groups)");
    }
    if (cfg.window < 0) throw InvalidArgument("wseqconv: window g' must be >= 1");
  }
}

int effective_window(const SeqConvConfig& cfg, std::size_t in_width) {
  if (cfg.window > 0) return cfg.window;
  return static_cast<int>(in_width / static_cast<std::size_t>(cfg.growth));
}

GroupView group_view(const SeqConvConfig& cfg, std::size_t in_width, int i) {
  const auto k = static_cast<std::size_t>(cfg.growth);
  if (cfg.aggregation == Aggregation::dense) {
    return {0, in_width + static_cast<std::size_t>(i - 1) * k};
  }
  const int m = static_cast<int>(in_width / k);
  const int first = std::max(1 - m, i - effective_window(cfg, in_width));
  return {static_cast<std::size_t>(first - (1 - m)) * k, static_cast<std::size_t>(i - first) * k};
}

std::vector<int> window_mask(int i, int window, int input_groups) {
  if (i < 1) throw InvalidArgument("window_mask: group index must be >= 1");
  std::vector<int> mask;
  for (int j = 1 - input_groups; j <= i - 1; ++j) mask.push_back(j >= i - window ? 1 : 0);
  return mask;
}

std::vector<ParamShape> param_shapes(const SeqConvConfig& cfg, std::size_t in_width) {
  validate(cfg, in_width);
  const auto k = static_cast<std::size_t>(cfg.growth);
  std::vector<ParamShape> shapes;
  for (int i = 1; i <= cfg.groups; ++i) {
    const std::string g = "group" + std::to_string(i);
    const std::size_t in = group_view(cfg, in_width, i).count;
    auto unit = [&](const std::string& name, Shape kernel) {
      shapes.push_back({g + "." + name + ".kernel", std::move(kernel)});
      shapes.push_back({g + "." + name + ".bn.gamma", {k}});
      shapes.push_back({g + "." + name + ".bn.beta", {k}});
    };
    if (cfg.transform == Transform::basic) {
      unit("conv3x3", {k, in, 3, 3});
    } else {
      unit("conv1x1", {k, in, 1, 1});
      unit("conv3x3", {k, k / static_cast<std::size_t>(cfg.subgroups), 3, 3});
    }
  }
  return shapes;
}

std::uint64_t param_count(const SeqConvConfig& cfg, std::size_t in_width) {
  std::uint64_t n = 0;
  for (const auto& s : param_shapes(cfg, in_width)) n += shape_numel(s.shape);
  return n;
}

std::uint64_t layer_macs(const SeqConvConfig& cfg, std::size_t in_width, std::size_t h, std::size_t w) {
  validate(cfg, in_width);
  const auto k = static_cast<std::uint64_t>(cfg.growth);
  const std::uint64_t hw = static_cast<std::uint64_t>(h) * w;
  std::uint64_t macs = 0;
  for (int i = 1; i <= cfg.groups; ++i) {
    const std::uint64_t in = group_view(cfg, in_width, i).count;
    if (cfg.transform == Transform::basic) {
      macs += hw * k * in * 9;
    } else {
      macs += hw * k * in + hw * k * (k / static_cast<std::uint64_t>(cfg.subgroups)) * 9;
    }
  }
  return macs;
}

template <typename T>
GroupTransform<T>::GroupTransform(const SeqConvConfig& cfg, std::size_t in_width) : in_width_(in_width) {
  const auto k = static_cast<std::size_t>(cfg.growth);
  if (cfg.transform == Transform::basic) {
    units_.emplace_back(in_width, k, 3, Conv2dGeometry{1, 1, 1}, cfg.final_activation);
  } else {
    units_.emplace_back(in_width, k, 1, Conv2dGeometry{1, 0, 1}, true);
    units_.emplace_back(k, k, 3, Conv2dGeometry{1, 1, cfg.subgroups}, cfg.final_activation);
  }
}

template <typename T>
Tensor<T> GroupTransform<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y = x;
  for (auto& u : units_) y = u.forward(y, mode);
  return y;
}

template <typename T>
void GroupTransform<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  if (units_.size() == 1) {
    units_[0].collect(prefix + ".conv3x3", out);
  } else {
    units_[0].collect(prefix + ".conv1x1", out);
    units_[1].collect(prefix + ".conv3x3", out);
  }
}

template <typename T>
void GroupTransform<T>::collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) {
  if (units_.size() == 1) {
    units_[0].collect_stats(prefix + ".conv3x3", out);
  } else {
    units_[0].collect_stats(prefix + ".conv1x1", out);
    units_[1].collect_stats(prefix + ".conv3x3", out);
  }
}

template <typename T>
SeqConvLayer<T>::SeqConvLayer(SeqConvConfig cfg, std::size_t in_width) : cfg_(cfg), in_width_(in_width) {
  validate(cfg_, in_width_);
  for (int i = 1; i <= cfg_.groups; ++i) groups_.emplace_back(cfg_, group_view(cfg_, in_width_, i).count);
}

template <typename T>
Tensor<T> SeqConvLayer<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != in_width_) {
    throw InvalidArgument("seqconv: layer built for " + std::to_string(in_width_) + " input channels, got shape " +
                          shape_to_string(x.shape()));
  }
  const auto k = static_cast<std::size_t>(cfg_.growth);
  outputs_.clear();
  for (int i = 1; i <= cfg_.groups; ++i) {
    const GroupView view = group_view(cfg_, in_width_, i);
    std::vector<Tensor<T>> parts;
    std::size_t first_output = 1;
    if (view.begin < in_width_) {
      parts.push_back(slice_channels(x, view.begin, in_width_ - view.begin));
    } else {
      first_output = (view.begin - in_width_) / k + 1;
    }
    for (std::size_t j = first_output; j < static_cast<std::size_t>(i); ++j) parts.push_back(outputs_[j - 1]);
    const Tensor<T> input = concat_channels<T>(parts);
    outputs_.push_back(groups_[static_cast<std::size_t>(i - 1)].forward(input, mode));
  }
  return concat_channels<T>(outputs_);
}

template <typename T>
void SeqConvLayer<T>::zero_init() {
  for (auto& g : groups_) {
    for (auto& u : g.units()) {
      auto kv = u.conv().kernel().values();
      std::fill(kv.begin(), kv.end(), T{0});
      u.bn().reset_affine();
    }
  }
}

template <typename T>
void SeqConvLayer<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  for (std::size_t i = 0; i < groups_.size(); ++i) groups_[i].collect(prefix + ".group" + std::to_string(i + 1), out);
}

template <typename T>
void SeqConvLayer<T>::collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    groups_[i].collect_stats(prefix + ".group" + std::to_string(i + 1), out);
  }
}

template <typename T>
Tensor<T> subgrouped_3x3(const Tensor<T>& input, const Tensor<T>& kernel, int subgroups) {
  if (subgroups < 1 || input.dim(1) % static_cast<std::size_t>(subgroups) != 0) {
    throw InvalidArgument("subgrouped_3x3: width " + std::to_string(input.dim(1)) + " not divisible by c=" +
                          std::to_string(subgroups));
  }
  return conv2d(input, kernel, Conv2dGeometry{1, 1, subgroups});
}

template class GroupTransform<float>;
template class GroupTransform<double>;
template class SeqConvLayer<float>;
template class SeqConvLayer<double>;
template Tensor<float> subgrouped_3x3(const Tensor<float>&, const Tensor<float>&, int);
template Tensor<double> subgrouped_3x3(const Tensor<double>&, const Tensor<double>&, int);

}  // namespace seqconv
