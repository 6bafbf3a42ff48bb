// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstdint>
#include <string>

#include "seqconv/builder.hpp"
#include "seqconv/gradcheck.hpp"

namespace seqconv {

struct NetworkGradCheckOptions {
  std::size_t batch = 4;
  std::size_t size = 8;  // input height and width
  GradCheckOptions check{.max_coords_per_tensor = 6};
  /// Probe points are redrawn (up to max_draws times) until every ReLU input
  /// is at least this far from zero.
  double relu_margin = 1e-4;
  int max_draws = 64;
};

struct NetworkGradCheckReport {
  GradCheckReport report;
  std::size_t tensors = 0;
  std::string worst_name;
  int draws = 0;                 // probe points drawn
  double relu_margin = 0.0;      // smallest |ReLU input| at the chosen point
};

/// Finite-difference check of the cross-entropy loss of a double-precision
/// network w.r.t. every parameter. Weights are initialized from `seed`, then
/// zeroed kernels, BN affine parameters and the fc bias are jittered so the
/// probe point is generic (zero-initialized blocks would hide most gradients).
/// Draws are deterministic in `seed`; the draw with the largest ReLU margin
/// is used if none reaches `relu_margin`.
NetworkGradCheckReport network_grad_check(const NetworkSpec& spec, std::uint64_t seed,
                                          const NetworkGradCheckOptions& opt = {});

}  // namespace seqconv
