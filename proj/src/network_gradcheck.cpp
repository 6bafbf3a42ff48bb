// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/network_gradcheck.hpp"

#include <algorithm>
#include <random>

#include "seqconv/trainer.hpp"

namespace seqconv {

NetworkGradCheckReport network_grad_check(const NetworkSpec& spec, std::uint64_t seed,
                                          const NetworkGradCheckOptions& opt) {
  Network<double> net(spec);
  init_weights(net, seed);
  const auto named = net.parameters();
  std::vector<std::vector<double>> initial;
  for (const auto& p : named) initial.emplace_back(p.tensor.values().begin(), p.tensor.values().end());

  Tensor<double> x(Shape{opt.batch, spec.in_channels, opt.size, opt.size});
  std::vector<int> labels(opt.batch);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % spec.classes);
  ForwardContext ctx;
  auto loss = [&] { return softmax_cross_entropy(net.forward(x, ctx), std::span<const int>(labels)); };

  auto draw = [&](int attempt) {
    Rng rng(seed + 1 + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt));
    std::normal_distribution<double> jitter(0.0, 0.1), unit(0.0, 1.0);
    for (std::size_t i = 0; i < named.size(); ++i) {
      Tensor<double> t = named[i].tensor;
      auto v = t.values();
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double init = initial[i][j];
        switch (named[i].kind) {
          case ParamKind::conv_kernel: v[j] = init == 0.0 ? jitter(rng) : init; break;
          case ParamKind::bn_gamma: v[j] = 1.0 + jitter(rng); break;
          case ParamKind::bn_beta:
          case ParamKind::fc_bias: v[j] = jitter(rng); break;
          case ParamKind::fc_weight: v[j] = init; break;
        }
      }
    }
    for (auto& v : x.values()) v = unit(rng);
    ReluSignMonitor monitor;
    monitor.start_recording();
    loss();
    return monitor.min_margin();
  };

  NetworkGradCheckReport out;
  int best = 0;
  double best_margin = -1.0;
  for (int attempt = 0; attempt < std::max(opt.max_draws, 1); ++attempt) {
    const double m = draw(attempt);
    out.draws = attempt + 1;
    if (m > best_margin) {
      best_margin = m;
      best = attempt;
    }
    if (m >= opt.relu_margin) break;
  }
  out.relu_margin = draw(best);

  std::vector<Tensor<double>> tensors;
  for (const auto& p : named) tensors.push_back(p.tensor);
  out.tensors = tensors.size();
  out.report = grad_check(loss, tensors, opt.check);
  out.worst_name = named[out.report.worst_tensor].name;
  return out;
}

}  // namespace seqconv
