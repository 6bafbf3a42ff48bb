// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "seqconv/errors.hpp"
#include "seqconv/parallel.hpp"

namespace seqconv {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

// Returns the active tape when any of the inputs wants a gradient.
template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = Tape<T>::active();
  if (tape == nullptr) return nullptr;
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return tape;
  }
  return nullptr;
}

template <typename T>
void accumulate(const NodePtr<T>& node, std::size_t i, T v) {
  node->grad[i] += v;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

// Samples per backward partial. Fixed so reduction order never depends on
// the thread count.
constexpr std::size_t kConvChunk = 4;

struct ConvDims {
  std::size_t n, c, h, w;        // input
  std::size_t o, cg, kh, kw;     // kernel (cg = input channels per group)
  std::size_t og;                // output channels per group
  std::size_t ho, wo;            // output spatial
  std::size_t groups;
  int stride, pad;
  std::size_t kc() const { return cg * kh * kw; }
  std::size_t positions() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvDims conv_dims(const Shape& in, const Shape& k, Conv2dGeometry geo) {
  require(in.size() == 4, "conv2d: input must be NCHW, got rank " + std::to_string(in.size()));
  require(k.size() == 4, "conv2d: kernel must be OIHW, got rank " + std::to_string(k.size()));
  require(geo.stride >= 1, "conv2d: stride must be positive");
  require(geo.padding >= 0, "conv2d: padding must be non-negative");
  require(geo.groups >= 1, "conv2d: groups must be positive");
  ConvDims d{};
  d.n = in[0];
  d.c = in[1];
  d.h = in[2];
  d.w = in[3];
  d.o = k[0];
  d.cg = k[1];
  d.kh = k[2];
  d.kw = k[3];
  d.groups = static_cast<std::size_t>(geo.groups);
  d.stride = geo.stride;
  d.pad = geo.padding;
  require(d.c % d.groups == 0, "conv2d: input channels (C=" + std::to_string(d.c) +
                                   ") not divisible by groups=" + std::to_string(d.groups));
  require(d.o % d.groups == 0, "conv2d: output channels (O=" + std::to_string(d.o) +
                                   ") not divisible by groups=" + std::to_string(d.groups));
  require(d.cg == d.c / d.groups, "conv2d: kernel I extent (" + std::to_string(d.cg) +
                                      ") must equal C/groups=" + std::to_string(d.c / d.groups));
  const long hp = static_cast<long>(d.h) + 2L * d.pad - static_cast<long>(d.kh);
  const long wp = static_cast<long>(d.w) + 2L * d.pad - static_cast<long>(d.kw);
  require(hp >= 0, "conv2d: kernel height exceeds padded input height (H)");
  require(wp >= 0, "conv2d: kernel width exceeds padded input width (W)");
  d.ho = static_cast<std::size_t>(hp / d.stride + 1);
  d.wo = static_cast<std::size_t>(wp / d.stride + 1);
  d.og = d.o / d.groups;
  return d;
}

// Unfold channels [c0, c0 + cg) of one sample into a (cg*kh*kw) x (ho*wo)
// row-major matrix.
template <typename T>
void im2col(const T* sample, const ConvDims& d, std::size_t c0, T* cols) {
  const long h = static_cast<long>(d.h), w = static_cast<long>(d.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.cg; ++c) {
    const T* plane = sample + (c0 + c) * d.h * d.w;
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j, ++row) {
        T* out = cols + row * d.positions();
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
          const long ih = static_cast<long>(oh) * d.stride - d.pad + static_cast<long>(i);
          T* orow = out + oh * d.wo;
          if (ih < 0 || ih >= h) {
            std::fill(orow, orow + d.wo, T{0});
            continue;
          }
          const T* irow = plane + ih * w;
          if (d.stride == 1) {
            const long shift = static_cast<long>(j) - d.pad;
            for (std::size_t ow = 0; ow < d.wo; ++ow) {
              const long iw = static_cast<long>(ow) + shift;
              orow[ow] = (iw >= 0 && iw < w) ? irow[iw] : T{0};
            }
          } else {
            for (std::size_t ow = 0; ow < d.wo; ++ow) {
              const long iw = static_cast<long>(ow) * d.stride - d.pad + static_cast<long>(j);
              orow[ow] = (iw >= 0 && iw < w) ? irow[iw] : T{0};
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add cols back into channels [c0, c0 + cg).
template <typename T>
void col2im(const T* cols, const ConvDims& d, std::size_t c0, T* sample) {
  const long h = static_cast<long>(d.h), w = static_cast<long>(d.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < d.cg; ++c) {
    T* plane = sample + (c0 + c) * d.h * d.w;
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j, ++row) {
        const T* in = cols + row * d.positions();
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
          const long ih = static_cast<long>(oh) * d.stride - d.pad + static_cast<long>(i);
          if (ih < 0 || ih >= h) continue;
          T* prow = plane + ih * w;
          const T* crow = in + oh * d.wo;
          for (std::size_t ow = 0; ow < d.wo; ++ow) {
            const long iw = static_cast<long>(ow) * d.stride - d.pad + static_cast<long>(j);
            if (iw >= 0 && iw < w) prow[iw] += crow[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Shape conv2d_output_shape(const Shape& input, const Shape& kernel, Conv2dGeometry geo) {
  const auto d = conv_dims(input, kernel, geo);
  return {d.n, d.o, d.ho, d.wo};
}

std::uint64_t conv2d_macs(const Shape& input, const Shape& kernel, Conv2dGeometry geo) {
  const auto d = conv_dims(input, kernel, geo);
  return static_cast<std::uint64_t>(d.n) * d.positions() * d.o * d.kc();
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, Conv2dGeometry geo) {
  const ConvDims d = conv_dims(input.shape(), kernel.shape(), geo);
  Tensor<T> out(Shape{d.n, d.o, d.ho, d.wo});
  const std::size_t in_sample = d.c * d.h * d.w;
  const std::size_t out_sample = d.o * d.positions();
  const std::size_t kc = d.kc();
  const T* x = input.values().data();
  const T* k = kernel.values().data();
  T* y = out.values().data();

  parallel_for(d.n, [&](std::size_t n) {
    std::vector<T> cols(d.pointwise() ? 0 : kc * d.positions());
    for (std::size_t g = 0; g < d.groups; ++g) {
      const T* src;
      if (d.pointwise()) {
        src = x + n * in_sample + g * d.cg * d.h * d.w;
      } else {
        im2col(x + n * in_sample, d, g * d.cg, cols.data());
        src = cols.data();
      }
      ConstMatMap<T> wmat(k + g * d.og * kc, d.og, kc);
      ConstMatMap<T> cmat(src, kc, d.positions());
      MatMap<T> ymat(y + n * out_sample + g * d.og * d.positions(), d.og, d.positions());
      ymat.noalias() = wmat * cmat;
    }
  });

  if (auto* tape = recording_tape<T>({&input, &kernel})) {
    auto xn = input.node(), kn = kernel.node(), yn = out.node();
    tape->record({xn, kn}, yn, [xn, kn, yn, d]() {
      const std::size_t in_sample = d.c * d.h * d.w;
      const std::size_t out_sample = d.o * d.positions();
      const std::size_t kc = d.kc();
      const bool want_x = xn->requires_grad, want_k = kn->requires_grad;
      const std::size_t chunks = (d.n + kConvChunk - 1) / kConvChunk;
      std::vector<std::vector<T>> partial(want_k ? chunks : 0);
      parallel_for(chunks, [&](std::size_t ci) {
        std::vector<T> cols(d.pointwise() ? 0 : kc * d.positions());
        std::vector<T> dcols(d.pointwise() ? 0 : kc * d.positions());
        if (want_k) partial[ci].assign(kn->value.size(), T{0});
        const std::size_t end = std::min(d.n, (ci + 1) * kConvChunk);
        for (std::size_t n = ci * kConvChunk; n < end; ++n) {
          for (std::size_t g = 0; g < d.groups; ++g) {
            ConstMatMap<T> dy(yn->grad.data() + n * out_sample + g * d.og * d.positions(), d.og,
                              d.positions());
            ConstMatMap<T> wmat(kn->value.data() + g * d.og * kc, d.og, kc);
            if (want_k) {
              const T* src;
              if (d.pointwise()) {
                src = xn->value.data() + n * in_sample + g * d.cg * d.h * d.w;
              } else {
                im2col(xn->value.data() + n * in_sample, d, g * d.cg, cols.data());
                src = cols.data();
              }
              ConstMatMap<T> cmat(src, kc, d.positions());
              MatMap<T> dw(partial[ci].data() + g * d.og * kc, d.og, kc);
              dw.noalias() += dy * cmat.transpose();
            }
            if (want_x) {
              if (d.pointwise()) {
                MatMap<T> dx(xn->grad.data() + n * in_sample + g * d.cg * d.h * d.w, kc, d.positions());
                dx.noalias() += wmat.transpose() * dy;
              } else {
                MatMap<T> dc(dcols.data(), kc, d.positions());
                dc.noalias() = wmat.transpose() * dy;
                col2im(dcols.data(), d, g * d.cg, xn->grad.data() + n * in_sample);
              }
            }
          }
        }
      });
      if (want_k) {
        for (const auto& p : partial) {
          for (std::size_t i = 0; i < p.size(); ++i) kn->grad[i] += p[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormStats<T>& stats, Mode mode, BatchNormOptions opt) {
  require(input.rank() == 4 || input.rank() == 2, "batch_norm: input must be NCHW or NC");
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t hw = input.rank() == 4 ? input.dim(2) * input.dim(3) : 1;
  require(gamma.numel() == c, "batch_norm: gamma length " + std::to_string(gamma.numel()) +
                                  " != channels C=" + std::to_string(c));
  require(beta.numel() == c, "batch_norm: beta length " + std::to_string(beta.numel()) +
                                 " != channels C=" + std::to_string(c));
  require(stats.mean.size() == c && stats.var.size() == c,
          "batch_norm: running statistics sized for " + std::to_string(stats.mean.size()) +
              " channels, input has C=" + std::to_string(c));
  if (mode == Mode::eval && !stats.populated) {
    throw InvalidState("batch_norm: eval mode requires populated running statistics");
  }
  const std::size_t m = n * hw;
  Tensor<T> out(input.shape());
  std::vector<T> xhat(input.numel());
  std::vector<T> inv_std(c);
  const T* x = input.values().data();
  T* y = out.values().data();

  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = x + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) s += p[j];
      }
      mean = s / static_cast<double>(m);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = x + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double dlt = p[j] - mean;
          v += dlt * dlt;
        }
      }
      var = v / static_cast<double>(m);
      stats.mean[ch] = static_cast<T>(opt.momentum * stats.mean[ch] + (1.0 - opt.momentum) * mean);
      stats.var[ch] = static_cast<T>(opt.momentum * stats.var[ch] + (1.0 - opt.momentum) * var);
    } else {
      mean = stats.mean[ch];
      var = stats.var[ch];
    }
    const T is = static_cast<T>(1.0 / std::sqrt(var + opt.eps));
    const T mu = static_cast<T>(mean);
    inv_std[ch] = is;
    const T g = gamma[ch], b = beta[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const T xh = (x[off + j] - mu) * is;
        xhat[off + j] = xh;
        y[off + j] = g * xh + b;
      }
    }
  }
  if (mode == Mode::train) stats.populated = true;

  if (auto* tape = recording_tape<T>({&input, &gamma, &beta})) {
    auto xn = input.node(), gn = gamma.node(), bn = beta.node(), yn = out.node();
    tape->record({xn, gn, bn}, yn,
                 [xn, gn, bn, yn, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, hw, m, mode]() {
                   const T* dy = yn->grad.data();
                   for (std::size_t ch = 0; ch < c; ++ch) {
                     double sdy = 0.0, sdyx = 0.0;
                     for (std::size_t i = 0; i < n; ++i) {
                       const std::size_t off = (i * c + ch) * hw;
                       for (std::size_t j = 0; j < hw; ++j) {
                         sdy += dy[off + j];
                         sdyx += static_cast<double>(dy[off + j]) * xhat[off + j];
                       }
                     }
                     if (bn->requires_grad) bn->grad[ch] += static_cast<T>(sdy);
                     if (gn->requires_grad) gn->grad[ch] += static_cast<T>(sdyx);
                     if (!xn->requires_grad) continue;
                     const T scale = gn->value[ch] * inv_std[ch];
                     if (mode == Mode::eval) {
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t off = (i * c + ch) * hw;
                         for (std::size_t j = 0; j < hw; ++j) xn->grad[off + j] += scale * dy[off + j];
                       }
                       continue;
                     }
                     const T mdy = static_cast<T>(sdy / static_cast<double>(m));
                     const T mdyx = static_cast<T>(sdyx / static_cast<double>(m));
                     for (std::size_t i = 0; i < n; ++i) {
                       const std::size_t off = (i * c + ch) * hw;
                       for (std::size_t j = 0; j < hw; ++j) {
                         xn->grad[off + j] += scale * (dy[off + j] - mdy - xhat[off + j] * mdyx);
                       }
                     }
                   }
                 });
  }
  return out;
}

namespace {
thread_local ReluSignMonitor* active_monitor = nullptr;
}

ReluSignMonitor::ReluSignMonitor() : previous_(active_monitor) { active_monitor = this; }
ReluSignMonitor::~ReluSignMonitor() { active_monitor = previous_; }
ReluSignMonitor* ReluSignMonitor::active() { return active_monitor; }

void ReluSignMonitor::start_recording() {
  pattern_.clear();
  recording_ = true;
  flipped_ = false;
  min_margin_ = std::numeric_limits<double>::infinity();
}

void ReluSignMonitor::start_comparing() {
  recording_ = false;
  cursor_ = 0;
  flipped_ = false;
}

void ReluSignMonitor::observe(double value) {
  const bool positive = value > 0.0;
  if (recording_) {
    pattern_.push_back(positive);
    min_margin_ = std::min(min_margin_, std::abs(value));
  } else if (cursor_ >= pattern_.size() || pattern_[cursor_++] != positive) {
    flipped_ = true;
  }
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  const auto x = input.values();
  auto y = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::isnan(x[i]) || x[i] > T{0} ? x[i] : T{0};  // NaN propagates
  if (auto* monitor = ReluSignMonitor::active()) {
    for (const T v : x) monitor->observe(static_cast<double>(v));
  }
  if (auto* tape = recording_tape<T>({&input})) {
    auto xn = input.node(), yn = out.node();
    tape->record({xn}, yn, [xn, yn]() {
      for (std::size_t i = 0; i < xn->value.size(); ++i) {
        if (xn->value[i] > T{0}) xn->grad[i] += yn->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) return input;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(input.numel());
  std::bernoulli_distribution keep(1.0 - rate);
  for (auto& v : mask) v = keep(rng) ? scale : T{0};
  Tensor<T> out(input.shape());
  const auto x = input.values();
  auto y = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
  if (auto* tape = recording_tape<T>({&input})) {
    auto xn = input.node(), yn = out.node();
    tape->record({xn}, yn, [xn, yn, mask = std::move(mask)]() {
      for (std::size_t i = 0; i < mask.size(); ++i) xn->grad[i] += yn->grad[i] * mask[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat_channels: no parts");
  const Shape& first = parts[0].shape();
  require(first.size() == 4, "concat_channels: parts must be NCHW");
  std::size_t total = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    require(s.size() == 4, "concat_channels: part " + std::to_string(p) + " is not NCHW");
    require(s[0] == first[0], "concat_channels: part " + std::to_string(p) + " batch extent N mismatch");
    require(s[2] == first[2] && s[3] == first[3],
            "concat_channels: part " + std::to_string(p) + " spatial extent (H, W) mismatch");
    total += s[1];
  }
  if (parts.size() == 1) return parts[0];
  const std::size_t n = first[0], hw = first[2] * first[3];
  Tensor<T> out(Shape{n, total, first[2], first[3]});
  T* y = out.values().data();
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& part : parts) {
    offsets.push_back(off);
    const std::size_t cp = part.dim(1);
    const T* x = part.values().data();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(x + i * cp * hw, x + (i + 1) * cp * hw, y + (i * total + off) * hw);
    }
    off += cp;
  }
  Tape<T>* tape = Tape<T>::active();
  bool any = false;
  for (const auto& part : parts) any = any || part.requires_grad();
  if (tape != nullptr && any) {
    std::vector<NodePtr<T>> nodes;
    for (const auto& part : parts) nodes.push_back(part.node());
    auto yn = out.node();
    tape->record(nodes, yn, [nodes, yn, offsets, n, hw, total]() {
      for (std::size_t p = 0; p < nodes.size(); ++p) {
        const auto& xn = nodes[p];
        if (!xn->requires_grad) continue;
        const std::size_t cp = xn->shape[1];
        for (std::size_t i = 0; i < n; ++i) {
          const T* src = yn->grad.data() + (i * total + offsets[p]) * hw;
          T* dst = xn->grad.data() + i * cp * hw;
          for (std::size_t j = 0; j < cp * hw; ++j) dst[j] += src[j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count) {
  require(input.rank() == 4, "slice_channels: input must be NCHW");
  const std::size_t c = input.dim(1);
  require(count >= 1 && begin + count <= c, "slice_channels: range [" + std::to_string(begin) + ", " +
                                                std::to_string(begin + count) + ") exceeds C=" +
                                                std::to_string(c));
  if (begin == 0 && count == c) return input;
  const std::size_t n = input.dim(0), hw = input.dim(2) * input.dim(3);
  Tensor<T> out(Shape{n, count, input.dim(2), input.dim(3)});
  const T* x = input.values().data();
  T* y = out.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(x + (i * c + begin) * hw, x + (i * c + begin + count) * hw, y + i * count * hw);
  }
  if (auto* tape = recording_tape<T>({&input})) {
    auto xn = input.node(), yn = out.node();
    tape->record({xn}, yn, [xn, yn, n, c, hw, begin, count]() {
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = yn->grad.data() + i * count * hw;
        T* dst = xn->grad.data() + (i * c + begin) * hw;
        for (std::size_t j = 0; j < count * hw; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
  Tensor<T> out(a.shape());
  const auto x = a.values(), z = b.values();
  auto y = out.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
  if (auto* tape = recording_tape<T>({&a, &b})) {
    auto an = a.node(), bn = b.node(), yn = out.node();
    tape->record({an, bn}, yn, [an, bn, yn]() {
      if (an->requires_grad) {
        for (std::size_t i = 0; i < yn->grad.size(); ++i) an->grad[i] += yn->grad[i];
      }
      if (bn->requires_grad) {
        for (std::size_t i = 0; i < yn->grad.size(); ++i) bn->grad[i] += yn->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
  Tensor<T> out(a.shape());
  const auto x = a.values(), z = b.values();
  auto y = out.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  if (auto* tape = recording_tape<T>({&a, &b})) {
    auto an = a.node(), bn = b.node(), yn = out.node();
    tape->record({an, bn}, yn, [an, bn, yn]() {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) {
        if (an->requires_grad) an->grad[i] += yn->grad[i] * bn->value[i];
        if (bn->requires_grad) bn->grad[i] += yn->grad[i] * an->value[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
  double s = 0.0;
  for (auto v : input.values()) s += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
  if (auto* tape = recording_tape<T>({&input})) {
    auto xn = input.node(), yn = out.node();
    tape->record({xn}, yn, [xn, yn]() {
      for (auto& g : xn->grad) g += yn->grad[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  require(input.rank() == 4, "global_avg_pool: input must be NCHW");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor<T> out(Shape{n, c});
  const T* x = input.values().data();
  T* y = out.values().data();
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += x[i * hw + j];
    y[i] = static_cast<T>(s / static_cast<double>(hw));
  }
  if (auto* tape = recording_tape<T>({&input})) {
    auto xn = input.node(), yn = out.node();
    tape->record({xn}, yn, [xn, yn, n, c, hw]() {
      const T inv = static_cast<T>(1.0 / static_cast<double>(hw));
      for (std::size_t i = 0; i < n * c; ++i) {
        const T g = yn->grad[i] * inv;
        for (std::size_t j = 0; j < hw; ++j) xn->grad[i * hw + j] += g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(input.rank() == 2, "linear: input must be N x C");
  require(weight.rank() == 2, "linear: weight must be C x K");
  const std::size_t n = input.dim(0), c = input.dim(1), k = weight.dim(1);
  require(weight.dim(0) == c, "linear: weight rows (" + std::to_string(weight.dim(0)) +
                                  ") != input features C=" + std::to_string(c));
  require(bias.numel() == k, "linear: bias length (" + std::to_string(bias.numel()) +
                                 ") != outputs K=" + std::to_string(k));
  Tensor<T> out(Shape{n, k});
  {
    ConstMatMap<T> x(input.values().data(), n, c);
    ConstMatMap<T> w(weight.values().data(), c, k);
    MatMap<T> y(out.values().data(), n, k);
    y.noalias() = x * w;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) y(i, j) += bias[j];
    }
  }
  if (auto* tape = recording_tape<T>({&input, &weight, &bias})) {
    auto xn = input.node(), wn = weight.node(), bn = bias.node(), yn = out.node();
    tape->record({xn, wn, bn}, yn, [xn, wn, bn, yn, n, c, k]() {
      ConstMatMap<T> dy(yn->grad.data(), n, k);
      if (xn->requires_grad) {
        MatMap<T> dx(xn->grad.data(), n, c);
        ConstMatMap<T> w(wn->value.data(), c, k);
        dx.noalias() += dy * w.transpose();
      }
      if (wn->requires_grad) {
        MatMap<T> dw(wn->grad.data(), c, k);
        ConstMatMap<T> x(xn->value.data(), n, c);
        dw.noalias() += x.transpose() * dy;
      }
      if (bn->requires_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) bn->grad[j] += dy(i, j);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require(logits.rank() == 2, "softmax_cross_entropy: logits must be N x K");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  require(labels.size() == n, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                  " labels for batch N=" + std::to_string(n));
  std::vector<T> prob(n * k);
  double loss = 0.0;
  const T* z = logits.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    require(label >= 0 && static_cast<std::size_t>(label) < k,
            "softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
    const T* row = z + i * k;
    const double mx = *std::max_element(row, row + k);
    double se = 0.0;
    for (std::size_t j = 0; j < k; ++j) se += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(se);
    for (std::size_t j = 0; j < k; ++j) prob[i * k + j] = static_cast<T>(std::exp(row[j] - lse));
    loss += lse - row[label];
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(loss / static_cast<double>(n)));
  if (auto* tape = recording_tape<T>({&logits})) {
    auto xn = logits.node(), yn = out.node();
    std::vector<int> lab(labels.begin(), labels.end());
    tape->record({xn}, yn, [xn, yn, prob = std::move(prob), lab = std::move(lab), n, k]() {
      const T scale = yn->grad[0] / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const T onehot = static_cast<int>(j) == lab[i] ? T{1} : T{0};
          xn->grad[i * k + j] += scale * (prob[i * k + j] - onehot);
        }
      }
    });
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& scores) {
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = scores.values().data() + i * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

template <typename T>
bool in_top_k(const Tensor<T>& scores, std::size_t n, int label, int k) {
  const std::size_t classes = scores.dim(1);
  const T* row = scores.values().data() + n * classes;
  const T target = row[label];
  int better = 0;
  for (std::size_t j = 0; j < classes; ++j) {
    if (row[j] > target || (row[j] == target && static_cast<int>(j) < label)) ++better;
  }
  return better < k;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  const auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

#define SEQCONV_INSTANTIATE_OPS(T)                                                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, Conv2dGeometry);                  \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                BatchNormStats<T>&, Mode, BatchNormOptions);                       \
  template Tensor<T> relu(const Tensor<T>&);                                                       \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, Rng&);                                \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                                  \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sum(const Tensor<T>&);                                                        \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                            \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);                \
  template std::vector<int> argmax_rows(const Tensor<T>&);                                         \
  template bool in_top_k(const Tensor<T>&, std::size_t, int, int);                                 \
  template void check_finite(const Tensor<T>&, const char*);

SEQCONV_INSTANTIATE_OPS(float)
SEQCONV_INSTANTIATE_OPS(double)

}  // namespace seqconv
