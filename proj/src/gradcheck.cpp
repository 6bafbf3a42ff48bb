// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "seqconv/errors.hpp"
#include "seqconv/ops.hpp"

namespace seqconv {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn, std::vector<Tensor<double>> params,
                           GradCheckOptions opt) {
  for (auto& p : params) p.set_requires_grad(true);
  ReluSignMonitor monitor;
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    TapeGuard<double> guard(tape);
    monitor.start_recording();
    Tensor<double> loss = loss_fn();
    if (loss.numel() != 1) throw InvalidArgument("grad_check: function must return a scalar");
    tape.backward(loss);
    for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  GradCheckReport report;
  bool crossed = false;
  auto evaluate = [&]() {
    monitor.start_comparing();
    const double v = loss_fn().item();
    crossed = crossed || monitor.flipped();
    return v;
  };
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].values();
    const std::size_t n = values.size();
    const std::size_t probes = opt.max_coords_per_tensor == 0 ? n : std::min(n, opt.max_coords_per_tensor);
    for (std::size_t q = 0; q < probes; ++q) {
      const std::size_t i = probes == n ? q : (q * n) / probes + (n / probes) / 2;
      const double saved = values[i];
      crossed = false;
      values[i] = saved + opt.eps;
      const double up = evaluate();
      values[i] = saved - opt.eps;
      const double down = evaluate();
      values[i] = saved;
      const double a = analytic[t][i];
      const double num = (up - down) / (2.0 * opt.eps);
      ++report.coords_checked;
      if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(a)) {
        report.pass = false;
        report.worst_tensor = t;
        report.worst_index = i;
        report.failure = "non-finite value at tensor " + std::to_string(t) + " coordinate " + std::to_string(i);
        return report;
      }
      if (crossed && opt.skip_kinks) {
        ++report.kinks_skipped;
        continue;
      }
      const double err = relative_error(a, num, opt.denominator_floor);
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_tensor = t;
        report.worst_index = i;
      }
    }
  }
  const double kink_fraction =
      report.coords_checked == 0 ? 0.0 : static_cast<double>(report.kinks_skipped) / static_cast<double>(report.coords_checked);
  report.pass = report.max_rel_err < opt.tol && kink_fraction <= opt.max_kink_fraction;
  if (kink_fraction > opt.max_kink_fraction) {
    report.failure = std::to_string(report.kinks_skipped) + " of " + std::to_string(report.coords_checked) +
                     " probes straddle a ReLU kink";
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& fn, Tensor<double> point,
                           GradCheckOptions opt) {
  return grad_check([&]() { return fn(point); }, {point}, opt);
}

}  // namespace seqconv
