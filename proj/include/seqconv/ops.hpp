// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "seqconv/tensor.hpp"

namespace seqconv {

enum class Mode { train, eval };

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Convolution

struct Conv2dGeometry {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

/// Output shape of conv2d; validates the input/kernel pairing.
Shape conv2d_output_shape(const Shape& input, const Shape& kernel, Conv2dGeometry geo);

/// Multiply-accumulates performed by conv2d for these shapes.
std::uint64_t conv2d_macs(const Shape& input, const Shape& kernel, Conv2dGeometry geo);

/// Grouped 2-D cross-correlation with zero padding. input NCHW, kernel
/// O x (C/groups) x kH x kW. Throws InvalidArgument naming the offending
/// dimension when shapes disagree.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, Conv2dGeometry geo = {});

// ---------------------------------------------------------------------------
// Normalization and activations

/// Running statistics of one batch-norm layer. `populated` turns true after
/// the first train-mode pass or when loaded explicitly.
template <typename T>
struct BatchNormStats {
  std::vector<T> mean;
  std::vector<T> var;
  bool populated = false;

  explicit BatchNormStats(std::size_t channels = 0) : mean(channels, T{0}), var(channels, T{1}) {}
};

struct BatchNormOptions {
  double eps = 1e-5;
  /// Fraction of the old running value kept per train step.
  double momentum = 0.9;
};

/// Per-channel batch normalization over N, H, W (input NCHW or NC).
/// Train mode normalizes with biased batch statistics and updates `stats`;
/// eval mode uses `stats` and throws InvalidState if they were never populated.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormStats<T>& stats, Mode mode, BatchNormOptions opt = {});

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Inverted dropout: survivors are scaled by 1/(1-rate). Identity in eval
/// mode or when rate == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng);

// ---------------------------------------------------------------------------
// Structural

/// Concatenate NCHW tensors along C, preserving list order.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);

/// Channels [begin, begin + count) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// Sum of all elements as a scalar tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& input);

// ---------------------------------------------------------------------------
// Head

/// N x C x H x W -> N x C.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

/// input N x C, weight C x K, bias K -> N x K.
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

/// Mean over the batch of -log softmax(logits)[label]. Max-subtracted.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Row-wise argmax of N x K scores.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& scores);

/// True if label is among the `k` largest scores of row n (ties broken by
/// lower index).
template <typename T>
bool in_top_k(const Tensor<T>& scores, std::size_t n, int label, int k);

/// Watches the sign of every ReLU input evaluated on the calling thread.
/// A recording pass stores the pattern; later comparing passes report
/// whether any sign differs, i.e. whether a perturbation crossed a kink.
class ReluSignMonitor {
 public:
  ReluSignMonitor();  // becomes the thread's active monitor
  ~ReluSignMonitor();
  ReluSignMonitor(const ReluSignMonitor&) = delete;
  ReluSignMonitor& operator=(const ReluSignMonitor&) = delete;

  static ReluSignMonitor* active();

  void start_recording();
  void start_comparing();
  /// True if a comparing pass saw a different pattern.
  bool flipped() const { return flipped_ || (!recording_ && cursor_ != pattern_.size()); }

  /// Smallest |input| seen while recording.
  double min_margin() const { return min_margin_; }

  void observe(double value);

 private:
  std::vector<bool> pattern_;
  std::size_t cursor_ = 0;
  bool recording_ = true;
  bool flipped_ = false;
  double min_margin_ = 0.0;
  ReluSignMonitor* previous_;
};

/// Throws NumericError if any value is NaN or infinite.
template <typename T>
void check_finite(const Tensor<T>& t, const char* what);

}  // namespace seqconv
