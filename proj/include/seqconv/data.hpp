// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqconv/ops.hpp"

namespace seqconv {

/// Images stored N x C x H x W, contiguous, with integer labels.
struct Dataset {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t classes = 10;
  std::vector<float> images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return channels * height * width; }
  std::span<float> image(std::size_t i) { return {images.data() + i * image_size(), image_size()}; }
  std::span<const float> image(std::size_t i) const { return {images.data() + i * image_size(), image_size()}; }

  /// Throws InvalidArgument if sizes or labels are inconsistent.
  void check() const;
  /// Samples at the given indices, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Batch of samples as an N x C x H x W tensor.
  template <typename T>
  Tensor<T> batch(std::span<const std::size_t> indices) const;
};

enum class CifarKind { cifar10, cifar100 };

constexpr std::size_t cifar_pixels = 3 * 32 * 32;
std::size_t cifar_record_size(CifarKind kind);

/// Parse standard CIFAR binary files (concatenated in order). CIFAR-100
/// records carry coarse then fine labels; the fine label is used. Pixels are
/// scaled to [0, 1]. Throws CorruptFile with the offending byte offset.
Dataset load_cifar_binary(const std::vector<std::string>& paths, CifarKind kind);
Dataset parse_cifar_binary(std::span<const std::uint8_t> bytes, CifarKind kind);

/// Inverse of the parser (values are rounded back to bytes; CIFAR-100 coarse
/// labels are written as `coarse_label`).
std::vector<std::uint8_t> encode_cifar_binary(const Dataset& data, CifarKind kind, std::uint8_t coarse_label = 0);
void write_cifar_binary(const std::string& path, const Dataset& data, CifarKind kind);

/// Pad-4 / random crop / random horizontal flip.
struct AugmentParams {
  int offset_y = 4;  // crop origin in the padded image, 0..2*pad
  int offset_x = 4;
  bool flip = false;
};
constexpr int augment_padding = 4;

AugmentParams draw_augment_params(Rng& rng);
/// Applies the transform to one C x H x W image.
void augment(std::span<const float> image, std::size_t channels, std::size_t height, std::size_t width,
             const AugmentParams& p, std::span<float> out);
void augment(std::span<const float> image, std::size_t channels, std::size_t height, std::size_t width, Rng& rng,
             std::span<float> out);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
};

ChannelStats channel_stats(const Dataset& data);
/// x <- (x - mean_c) / std_c in place. Throws InvalidArgument naming the
/// channel when std_c == 0.
void normalize(Dataset& data, const ChannelStats& stats);

/// Separable synthetic classification set: per-class smooth prototype
/// patterns plus seeded pixel noise, values in [0, 1], balanced labels
/// (class of sample i is i mod classes before a seeded shuffle).
struct SyntheticOptions {
  std::size_t classes = 10;
  std::size_t samples = 2000;
  std::size_t channels = 3;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.15;
  std::uint64_t seed = 0;
};
Dataset synthetic_classification(const SyntheticOptions& opt);

struct Split {
  Dataset train;
  Dataset validation;
};
/// Seeded random split holding out `validation_size` samples.
Split validation_split(const Dataset& data, std::size_t validation_size, std::uint64_t seed);
/// Indices used by validation_split, validation part first.
std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t seed);

}  // namespace seqconv
