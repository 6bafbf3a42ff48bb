// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "seqconv/tensor.hpp"

namespace seqconv {

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  /// Coordinates probed per tensor; 0 probes all of them. When limited, the
  /// probed indices are spread evenly across the tensor.
  std::size_t max_coords_per_tensor = 0;
  /// Denominator floor of the relative error. Central differences in double
  /// carry ~1e-16 |f| / eps of rounding noise, so gradients far below this
  /// floor are compared in absolute terms instead.
  double denominator_floor = 1e-6;
  /// Skip probes whose +-eps evaluations change the sign of any ReLU input;
  /// the central difference there straddles a kink.
  bool skip_kinks = true;
  /// The check fails if more than this fraction of probes is skipped.
  double max_kink_fraction = 0.05;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = true;
  std::size_t coords_checked = 0;
  std::size_t kinks_skipped = 0;
  /// Tensor index and flat coordinate of the worst (or first non-finite) probe.
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::string failure;  // non-empty on non-finite values
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compare the tape gradient of scalar `loss_fn()` with respect to each of
/// `params` against central differences (f(x+eps) - f(x-eps)) / (2 eps).
/// `loss_fn` must be deterministic and read the params' current values.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                           std::vector<Tensor<double>> params, GradCheckOptions opt = {});

/// Single-input form: f maps `point` to a scalar.
GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& fn,
                           Tensor<double> point, GradCheckOptions opt = {});

}  // namespace seqconv
