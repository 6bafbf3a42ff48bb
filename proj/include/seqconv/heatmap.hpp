// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <string>
#include <vector>

#include "seqconv/seqconv.hpp"

namespace seqconv {

/// Connection strengths of one aggregated layer: rows are target groups
/// 1..g, columns source positions 1-g' .. g-1 (positions <= 0 are the
/// k-wide groups of the layer input). Defined cells hold the row-normalized
/// mean absolute weight; cells outside the window hold `sentinel`.
struct HeatmapMatrix {
  static constexpr double sentinel = -1.0;

  int groups = 0;        // g
  int window = 0;        // g'
  int input_groups = 0;  // m
  std::vector<double> cells;  // row-major, groups x columns()

  int columns() const { return window + groups - 1; }
  int first_position() const { return 1 - window; }
  /// i in 1..g, j in first_position()..g-1.
  double at(int i, int j) const;
  bool defined(int i, int j) const { return at(i, j) != sentinel; }
  bool operator==(const HeatmapMatrix&) const = default;
};

/// Mean |w| of the kernel slice through which group i's aggregate-reading
/// conv (the 3x3 for basic, the 1x1 for bottleneck) sees source j, divided
/// by the row maximum (rows of zeros stay zero). Dense layers are treated
/// as windows covering every earlier position. Requires in_width % k == 0.
template <typename T>
HeatmapMatrix compute_heatmap(const SeqConvLayer<T>& layer);

/// Unnormalized statistic, same layout.
template <typename T>
HeatmapMatrix raw_heatmap(const SeqConvLayer<T>& layer);

/// CSV: a "# groups=.. window=.. input_groups=.." line, header
/// "target,<positions...>", then one row per target group.
std::string heatmap_csv(const HeatmapMatrix& m);
void write_heatmap_csv(const std::string& path, const HeatmapMatrix& m);
HeatmapMatrix parse_heatmap_csv(const std::string& text);
HeatmapMatrix read_heatmap_csv(const std::string& path);

}  // namespace seqconv
