// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/modules.hpp"

#include <algorithm>

#include "seqconv/errors.hpp"

namespace seqconv {

const char* to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::conv_kernel:
      return "conv";
    case ParamKind::bn_gamma:
      return "bn_gamma";
    case ParamKind::bn_beta:
      return "bn_beta";
    case ParamKind::fc_weight:
      return "fc_weight";
    case ParamKind::fc_bias:
      return "fc_bias";
  }
  return "?";
}

template <typename T>
Conv2d<T>::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, Conv2dGeometry geo) : geo_(geo) {
  const auto groups = static_cast<std::size_t>(geo.groups);
  if (groups == 0 || in % groups != 0 || out % groups != 0) {
    throw InvalidArgument("conv: channels " + std::to_string(in) + "->" + std::to_string(out) +
                          " not divisible by groups=" + std::to_string(groups));
  }
  kernel_ = Tensor<T>(Shape{out, in / groups, kernel, kernel}, T{0}, true);
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".kernel", kernel_, ParamKind::conv_kernel});
}

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels)
    : gamma_(Shape{channels}, T{1}, true), beta_(Shape{channels}, T{0}, true), stats_(channels) {}

template <typename T>
void BatchNorm<T>::reset_affine() {
  std::fill(gamma_.values().begin(), gamma_.values().end(), T{1});
  std::fill(beta_.values().begin(), beta_.values().end(), T{0});
}

template <typename T>
void BatchNorm<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".gamma", gamma_, ParamKind::bn_gamma});
  out.push_back({prefix + ".beta", beta_, ParamKind::bn_beta});
}

template <typename T>
void BatchNorm<T>::collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) {
  out.push_back({prefix, &stats_});
}

template <typename T>
ConvUnit<T>::ConvUnit(std::size_t in, std::size_t out, std::size_t kernel, Conv2dGeometry geo, bool activation)
    : conv_(in, out, kernel, geo), bn_(out), activation_(activation) {}

template <typename T>
Tensor<T> ConvUnit<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> y = bn_.forward(conv_.forward(x), mode);
  return activation_ ? relu(y) : y;
}

template <typename T>
void ConvUnit<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  conv_.collect(prefix, out);
  bn_.collect(prefix + ".bn", out);
}

template <typename T>
void ConvUnit<T>::collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) {
  bn_.collect_stats(prefix + ".bn", out);
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out)
    : weight_(Shape{in, out}, T{0}, true), bias_(Shape{out}, T{0}, true) {}

template <typename T>
void Linear<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".weight", weight_, ParamKind::fc_weight});
  out.push_back({prefix + ".bias", bias_, ParamKind::fc_bias});
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class ConvUnit<float>;
template class ConvUnit<double>;
template class Linear<float>;
template class Linear<double>;

}  // namespace seqconv
