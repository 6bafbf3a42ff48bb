// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/network.hpp"

#include "seqconv/errors.hpp"

namespace seqconv {

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  std::size_t c = spec_.in_channels;
  for (const StemLayer& l : spec_.stem) {
    stem_.emplace_back(c, l.out_channels, l.kernel, Conv2dGeometry{l.stride, static_cast<int>(l.kernel / 2), 1});
    c = l.out_channels;
  }
  for (std::size_t s = 0; s < spec_.stages.size(); ++s) {
    const StageSpec& st = spec_.stages[s];
    Stage stage;
    if (st.entry.kind == EntryKind::layer) {
      stage.entry.emplace(entry_layer_config(spec_, s, c), c);
    } else if (st.entry.kind == EntryKind::downsample) {
      stage.downsample.emplace(downsample_spec(spec_, s, c));
    }
    c = st.width;
    if (st.blocks > 0) {
      const ResidualBlockSpec rb = residual_block_spec(spec_, s);
      for (int b = 0; b < st.blocks; ++b) stage.blocks.emplace_back(rb);
    }
    stages_.push_back(std::move(stage));
  }
  if (spec_.head_width > 0) {
    head_conv_.emplace(c, spec_.head_width, 1, Conv2dGeometry{});
    c = spec_.head_width;
  }
  fc_ = Linear<T>(c, spec_.classes);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  if (x.rank() != 4 || x.dim(1) != spec_.in_channels) {
    throw InvalidArgument("network: expected N x " + std::to_string(spec_.in_channels) + " x H x W input, got " +
                          shape_to_string(x.shape()));
  }
  Tensor<T> h = x;
  for (auto& u : stem_) h = u.forward(h, ctx.mode);
  bool first_aggregated = true;
  for (auto& stage : stages_) {
    if (stage.entry) {
      h = stage.entry->forward(first_aggregated ? h : maybe_dropout(h, ctx), ctx.mode);
      first_aggregated = false;
    } else if (stage.downsample) {
      h = stage.downsample->forward(h, ctx, !first_aggregated);
      first_aggregated = false;
    }
    for (auto& block : stage.blocks) {
      h = block.forward(h, ctx);
      first_aggregated = false;
    }
  }
  if (head_conv_) h = head_conv_->forward(maybe_dropout(h, ctx), ctx.mode);
  return fc_.forward(global_avg_pool(h));
}

template <typename T>
std::vector<NamedParam<T>> Network<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  for (std::size_t i = 0; i < stem_.size(); ++i) stem_[i].collect("stem/conv" + std::to_string(i), out);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const std::string name = "stage" + std::to_string(s + 1);
    const Stage& st = stages_[s];
    if (st.entry) st.entry->collect(name + "/entry", out);
    if (st.downsample) st.downsample->collect(name + "/downsample", out);
    for (std::size_t b = 0; b < st.blocks.size(); ++b) st.blocks[b].collect(name + "/block" + std::to_string(b), out);
  }
  if (head_conv_) head_conv_->collect("head/conv1x1", out);
  fc_.collect("head/fc", out);
  return out;
}

template <typename T>
std::vector<NamedStats<T>> Network<T>::batch_norm_stats() {
  std::vector<NamedStats<T>> out;
  for (std::size_t i = 0; i < stem_.size(); ++i) stem_[i].collect_stats("stem/conv" + std::to_string(i), out);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const std::string name = "stage" + std::to_string(s + 1);
    Stage& st = stages_[s];
    if (st.entry) st.entry->collect_stats(name + "/entry", out);
    if (st.downsample) st.downsample->collect_stats(name + "/downsample", out);
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      st.blocks[b].collect_stats(name + "/block" + std::to_string(b), out);
    }
  }
  if (head_conv_) head_conv_->collect_stats("head/conv1x1", out);
  return out;
}

template <typename T>
std::vector<std::string> Network<T>::seq_layer_paths() const {
  std::vector<std::string> paths;
  for (const LayerInfo& row : layer_plan(spec_)) {
    if (row.kind == "seqconv") paths.push_back(row.path);
  }
  return paths;
}

template <typename T>
SeqConvLayer<T>& Network<T>::seq_layer(const std::string& path) {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const std::string name = "stage" + std::to_string(s + 1);
    Stage& st = stages_[s];
    if (st.entry && path == name + "/entry") return *st.entry;
    if (st.downsample && path == name + "/downsample/extension") return st.downsample->extension();
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      const std::string prefix = name + "/block" + std::to_string(b);
      if (path == prefix + "/layer1") return st.blocks[b].layer1();
      if (path == prefix + "/layer2") return st.blocks[b].layer2();
    }
  }
  std::string list;
  for (const auto& p : seq_layer_paths()) list += (list.empty() ? "" : ", ") + p;
  throw InvalidArgument("unknown layer '" + path + "' (available: " + list + ")");
}

template <typename T>
std::vector<ResidualBlock<T>*> Network<T>::residual_blocks() {
  std::vector<ResidualBlock<T>*> out;
  for (auto& st : stages_) {
    for (auto& b : st.blocks) out.push_back(&b);
  }
  return out;
}

template <typename T>
std::uint64_t Network<T>::parameter_count() const {
  std::uint64_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template class Network<float>;
template class Network<double>;

}  // namespace seqconv
