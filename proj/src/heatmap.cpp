// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "seqconv/errors.hpp"

namespace seqconv {

double HeatmapMatrix::at(int i, int j) const {
  if (i < 1 || i > groups || j < first_position() || j > groups - 1) {
    throw InvalidArgument("heatmap: cell (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
  }
  return cells[static_cast<std::size_t>((i - 1) * columns() + (j - first_position()))];
}

template <typename T>
HeatmapMatrix raw_heatmap(const SeqConvLayer<T>& layer) {
  const SeqConvConfig& cfg = layer.config();
  const auto k = static_cast<std::size_t>(cfg.growth);
  if (layer.in_width() % k != 0) {
    throw InvalidArgument("heatmap: input width " + std::to_string(layer.in_width()) +
                          " is not a whole number of k=" + std::to_string(k) + " groups");
  }
  HeatmapMatrix m;
  m.groups = cfg.groups;
  m.input_groups = static_cast<int>(layer.in_width() / k);
  m.window = cfg.aggregation == Aggregation::windowed ? effective_window(cfg, layer.in_width())
                                                      : m.input_groups + m.groups - 1;
  m.cells.assign(static_cast<std::size_t>(m.groups * m.columns()), HeatmapMatrix::sentinel);
  for (int i = 1; i <= m.groups; ++i) {
    const Tensor<T>& w = layer.groups()[static_cast<std::size_t>(i - 1)].reader().kernel();
    const std::size_t out = w.dim(0), in = w.dim(1), area = w.dim(2) * w.dim(3);
    const int first = std::max(1 - m.input_groups, i - m.window);
    const auto v = w.values();
    for (int j = first; j <= i - 1; ++j) {
      const std::size_t c0 = static_cast<std::size_t>(j - first) * k;
      double sum = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t c = c0; c < c0 + k; ++c) {
          const T* p = v.data() + (o * in + c) * area;
          for (std::size_t a = 0; a < area; ++a) sum += std::abs(static_cast<double>(p[a]));
        }
      }
      m.cells[static_cast<std::size_t>((i - 1) * m.columns() + (j - m.first_position()))] =
          sum / static_cast<double>(out * k * area);
    }
  }
  return m;
}

template <typename T>
HeatmapMatrix compute_heatmap(const SeqConvLayer<T>& layer) {
  HeatmapMatrix m = raw_heatmap(layer);
  const auto cols = static_cast<std::size_t>(m.columns());
  for (std::size_t r = 0; r < static_cast<std::size_t>(m.groups); ++r) {
    double peak = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = m.cells[r * cols + c];
      if (v != HeatmapMatrix::sentinel) peak = std::max(peak, v);
    }
    if (peak == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      double& v = m.cells[r * cols + c];
      if (v != HeatmapMatrix::sentinel) v /= peak;
    }
  }
  return m;
}

std::string heatmap_csv(const HeatmapMatrix& m) {
  std::ostringstream out;
  out << "# groups=" << m.groups << " window=" << m.window << " input_groups=" << m.input_groups << "\n";
  out << "target";
  for (int j = m.first_position(); j <= m.groups - 1; ++j) out << "," << j;
  out << "\n";
  char buf[64];
  for (int i = 1; i <= m.groups; ++i) {
    out << i;
    for (int j = m.first_position(); j <= m.groups - 1; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
  return out.str();
}

void write_heatmap_csv(const std::string& path, const HeatmapMatrix& m) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("heatmap: cannot write '" + path + "'");
  out << heatmap_csv(m);
}

HeatmapMatrix parse_heatmap_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  HeatmapMatrix m;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "# groups=%d window=%d input_groups=%d", &m.groups, &m.window, &m.input_groups) != 3 ||
      m.groups < 1 || m.window < 1) {
    throw InvalidArgument("heatmap: missing or malformed '# groups=.. window=.. input_groups=..' line");
  }
  std::getline(in, line);  // column header
  const auto cols = static_cast<std::size_t>(m.columns());
  for (int i = 1; i <= m.groups; ++i) {
    if (!std::getline(in, line)) throw InvalidArgument("heatmap: expected " + std::to_string(m.groups) + " rows");
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (std::stoi(cell) != i) throw InvalidArgument("heatmap: row " + std::to_string(i) + " is labelled " + cell);
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      m.cells.push_back(std::stod(cell));
      ++n;
    }
    if (n != cols) throw InvalidArgument("heatmap: row " + std::to_string(i) + " has " + std::to_string(n) + " cells");
  }
  return m;
}

HeatmapMatrix read_heatmap_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("heatmap: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_heatmap_csv(buf.str());
}

template HeatmapMatrix raw_heatmap(const SeqConvLayer<float>&);
template HeatmapMatrix raw_heatmap(const SeqConvLayer<double>&);
template HeatmapMatrix compute_heatmap(const SeqConvLayer<float>&);
template HeatmapMatrix compute_heatmap(const SeqConvLayer<double>&);

}  // namespace seqconv
