// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/blocks.hpp"

#include "seqconv/errors.hpp"

namespace seqconv {

ResidualBlockSpec ResidualBlockSpec::make(std::size_t width, int growth, int subgroups, Transform transform,
                                          Aggregation aggregation) {
  if (growth < 1 || width % static_cast<std::size_t>(growth) != 0) {
    throw InvalidArgument("residual block: width " + std::to_string(width) + " not divisible by k=" +
                          std::to_string(growth));
  }
  ResidualBlockSpec spec;
  spec.width = width;
  spec.layer1.groups = static_cast<int>(width / static_cast<std::size_t>(growth));
  spec.layer1.growth = growth;
  spec.layer1.aggregation = aggregation;
  spec.layer1.transform = transform;
  spec.layer1.subgroups = subgroups;
  spec.layer2 = spec.layer1;
  spec.layer2.final_activation = false;
  return spec;
}

void ResidualBlockSpec::validate() const {
  seqconv::validate(layer1, width);
  seqconv::validate(layer2, width);
  if (static_cast<std::size_t>(layer1.output_width()) != width ||
      static_cast<std::size_t>(layer2.output_width()) != width) {
    throw InvalidArgument("residual block: layer widths " + std::to_string(layer1.output_width()) + "/" +
                          std::to_string(layer2.output_width()) + " must equal block width " +
                          std::to_string(width));
  }
}

void DownsampleBlockSpec::validate() const {
  seqconv::validate(extension, in_width);
  if (downsize_groups < 1 || out_width() % static_cast<std::size_t>(downsize_groups) != 0) {
    throw InvalidArgument("downsample block: downsize groups=" + std::to_string(downsize_groups) +
                          " do not divide output width " + std::to_string(out_width()));
  }
}

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const ForwardContext& ctx) {
  if (ctx.dropout <= 0.0 || ctx.mode == Mode::eval) return x;
  if (ctx.rng == nullptr) throw InvalidState("dropout requires a random generator in the forward context");
  return dropout(x, ctx.dropout, ctx.mode, *ctx.rng);
}

template <typename T>
ResidualBlock<T>::ResidualBlock(const ResidualBlockSpec& spec)
    : spec_(spec), layer1_(spec.layer1, spec.width), layer2_(spec.layer2, spec.width) {
  spec_.validate();
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) {
  if (x.rank() != 4 || x.dim(1) != spec_.width) {
    throw InvalidArgument("residual block: expected width " + std::to_string(spec_.width) + ", got shape " +
                          shape_to_string(x.shape()));
  }
  Tensor<T> h = layer1_.forward(maybe_dropout(x, ctx), ctx.mode);
  h = layer2_.forward(maybe_dropout(h, ctx), ctx.mode);
  return add(x, h);
}

template <typename T>
void ResidualBlock<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  layer1_.collect(prefix + "/layer1", out);
  layer2_.collect(prefix + "/layer2", out);
}

template <typename T>
void ResidualBlock<T>::collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) {
  layer1_.collect_stats(prefix + "/layer1", out);
  layer2_.collect_stats(prefix + "/layer2", out);
}

template <typename T>
DownsampleBlock<T>::DownsampleBlock(const DownsampleBlockSpec& spec)
    : spec_(spec),
      extension_(spec.extension, spec.in_width),
      downsize_(spec.out_width(), spec.out_width(), 3, Conv2dGeometry{2, 1, spec.downsize_groups}) {
  spec_.validate();
}

template <typename T>
Tensor<T> DownsampleBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, bool dropout_before_extension) {
  if (x.rank() != 4 || x.dim(1) != spec_.in_width) {
    throw InvalidArgument("downsample block: expected width " + std::to_string(spec_.in_width) + ", got shape " +
                          shape_to_string(x.shape()));
  }
  const Tensor<T> e = extension_.forward(dropout_before_extension ? maybe_dropout(x, ctx) : x, ctx.mode);
  const std::vector<Tensor<T>> parts{x, e};
  return downsize_.forward(concat_channels<T>(parts), ctx.mode);
}

template <typename T>
void DownsampleBlock<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  extension_.collect(prefix + "/extension", out);
  downsize_.collect(prefix + "/downsize", out);
}

template <typename T>
void DownsampleBlock<T>::collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) {
  extension_.collect_stats(prefix + "/extension", out);
  downsize_.collect_stats(prefix + "/downsize", out);
}

template <typename T>
void zero_init_block(ResidualBlock<T>& block) {
  block.layer2().zero_init();
}

template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class DownsampleBlock<float>;
template class DownsampleBlock<double>;
template void zero_init_block(ResidualBlock<float>&);
template void zero_init_block(ResidualBlock<double>&);
template Tensor<float> maybe_dropout(const Tensor<float>&, const ForwardContext&);
template Tensor<double> maybe_dropout(const Tensor<double>&, const ForwardContext&);

}  // namespace seqconv
