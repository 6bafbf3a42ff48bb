// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "seqconv/errors.hpp"

namespace seqconv {

void Dataset::check() const {
  if (images.size() != labels.size() * image_size()) {
    throw InvalidArgument("dataset: " + std::to_string(images.size()) + " pixel values for " +
                          std::to_string(labels.size()) + " labels of " + std::to_string(image_size()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw InvalidArgument("dataset: label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.classes = classes;
  out.images.reserve(indices.size() * image_size());
  for (std::size_t i : indices) {
    const auto img = image(i);
    out.images.insert(out.images.end(), img.begin(), img.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

template <typename T>
Tensor<T> Dataset::batch(std::span<const std::size_t> indices) const {
  Tensor<T> x(Shape{indices.size(), channels, height, width});
  auto v = x.values();
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto img = image(indices[n]);
    std::transform(img.begin(), img.end(), v.begin() + static_cast<std::ptrdiff_t>(n * image_size()),
                   [](float p) { return static_cast<T>(p); });
  }
  return x;
}

template Tensor<float> Dataset::batch(std::span<const std::size_t>) const;
template Tensor<double> Dataset::batch(std::span<const std::size_t>) const;

// ---------------------------------------------------------------------------
// CIFAR binary

std::size_t cifar_record_size(CifarKind kind) { return (kind == CifarKind::cifar10 ? 1 : 2) + cifar_pixels; }

Dataset parse_cifar_binary(std::span<const std::uint8_t> bytes, CifarKind kind) {
  const std::size_t rec = cifar_record_size(kind);
  const std::size_t label_bytes = rec - cifar_pixels;
  if (bytes.size() % rec != 0) {
    throw CorruptFile("cifar: " + std::to_string(bytes.size()) + " bytes is not a multiple of the " +
                          std::to_string(rec) + "-byte record; trailing partial record",
                      bytes.size() - bytes.size() % rec);
  }
  Dataset d;
  d.classes = kind == CifarKind::cifar10 ? 10 : 100;
  const std::size_t n = bytes.size() / rec;
  d.images.resize(n * cifar_pixels);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * rec;
    const std::size_t label_at = base + label_bytes - 1;
    const std::uint8_t label = bytes[label_at];
    if (label >= d.classes) {
      throw CorruptFile("cifar: label " + std::to_string(label) + " of record " + std::to_string(i) +
                            " exceeds class count " + std::to_string(d.classes),
                        label_at);
    }
    d.labels[i] = label;
    const std::uint8_t* px = bytes.data() + base + label_bytes;
    float* dst = d.images.data() + i * cifar_pixels;
    for (std::size_t p = 0; p < cifar_pixels; ++p) dst[p] = static_cast<float>(px[p]) / 255.0f;
  }
  return d;
}

Dataset load_cifar_binary(const std::vector<std::string>& paths, CifarKind kind) {
  if (paths.empty()) throw InvalidArgument("cifar: no input files");
  Dataset all;
  all.classes = kind == CifarKind::cifar10 ? 10 : 100;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cifar: cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Dataset part;
    try {
      part = parse_cifar_binary(bytes, kind);
    } catch (const CorruptFile& e) {
      throw CorruptFile("'" + path + "': " + e.what(), e.offset());
    }
    all.images.insert(all.images.end(), part.images.begin(), part.images.end());
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  return all;
}

std::vector<std::uint8_t> encode_cifar_binary(const Dataset& data, CifarKind kind, std::uint8_t coarse_label) {
  if (data.channels != 3 || data.height != 32 || data.width != 32) {
    throw InvalidArgument("cifar: only 3x32x32 images can be encoded");
  }
  data.check();
  std::vector<std::uint8_t> bytes;
  bytes.reserve(data.size() * cifar_record_size(kind));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (kind == CifarKind::cifar100) bytes.push_back(coarse_label);
    bytes.push_back(static_cast<std::uint8_t>(data.labels[i]));
    for (float p : data.image(i)) {
      bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
    }
  }
  return bytes;
}

void write_cifar_binary(const std::string& path, const Dataset& data, CifarKind kind) {
  const auto bytes = encode_cifar_binary(data, kind);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cifar: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentParams draw_augment_params(Rng& rng) {
  std::uniform_int_distribution<int> offset(0, 2 * augment_padding);
  std::bernoulli_distribution flip(0.5);
  AugmentParams p;
  p.offset_y = offset(rng);
  p.offset_x = offset(rng);
  p.flip = flip(rng);
  return p;
}

void augment(std::span<const float> image, std::size_t channels, std::size_t height, std::size_t width,
             const AugmentParams& p, std::span<float> out) {
  if (image.size() != channels * height * width || out.size() != image.size()) {
    throw InvalidArgument("augment: buffer sizes do not match the image geometry");
  }
  if (p.offset_y < 0 || p.offset_x < 0 || p.offset_y > 2 * augment_padding || p.offset_x > 2 * augment_padding) {
    throw InvalidArgument("augment: crop offset outside the padded image");
  }
  const auto h = static_cast<long>(height), w = static_cast<long>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* src = image.data() + c * height * width;
    float* dst = out.data() + c * height * width;
    for (long y = 0; y < h; ++y) {
      const long sy = y + p.offset_y - augment_padding;
      for (long x = 0; x < w; ++x) {
        const long cx = p.flip ? w - 1 - x : x;
        const long sx = cx + p.offset_x - augment_padding;
        dst[y * w + x] = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? src[sy * w + sx] : 0.0f;
      }
    }
  }
}

void augment(std::span<const float> image, std::size_t channels, std::size_t height, std::size_t width, Rng& rng,
             std::span<float> out) {
  augment(image, channels, height, width, draw_augment_params(rng), out);
}

// ---------------------------------------------------------------------------
// Normalization

ChannelStats channel_stats(const Dataset& data) {
  data.check();
  if (data.size() == 0) throw InvalidArgument("channel_stats: empty dataset");
  ChannelStats s;
  s.mean.assign(data.channels, 0.0);
  s.std.assign(data.channels, 0.0);
  const std::size_t plane = data.height * data.width;
  const double count = static_cast<double>(data.size() * plane);
  for (std::size_t c = 0; c < data.channels; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float* p = data.images.data() + i * data.image_size() + c * plane;
      for (std::size_t j = 0; j < plane; ++j) sum += p[j];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float* p = data.images.data() + i * data.image_size() + c * plane;
      for (std::size_t j = 0; j < plane; ++j) sq += (p[j] - mean) * (p[j] - mean);
    }
    s.mean[c] = mean;
    s.std[c] = std::sqrt(sq / count);
  }
  return s;
}

void normalize(Dataset& data, const ChannelStats& stats) {
  if (stats.mean.size() != data.channels || stats.std.size() != data.channels) {
    throw InvalidArgument("normalize: statistics for " + std::to_string(stats.mean.size()) + " channels, data has " +
                          std::to_string(data.channels));
  }
  for (std::size_t c = 0; c < data.channels; ++c) {
    if (!(stats.std[c] > 0.0)) {
      throw InvalidArgument("normalize: channel " + std::to_string(c) + " is degenerate (std = 0)");
    }
  }
  const std::size_t plane = data.height * data.width;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t c = 0; c < data.channels; ++c) {
      float* p = data.images.data() + i * data.image_size() + c * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] = static_cast<float>((p[j] - stats.mean[c]) / stats.std[c]);
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic data and splits

Dataset synthetic_classification(const SyntheticOptions& opt) {
  if (opt.classes < 1 || opt.samples < opt.classes) {
    throw InvalidArgument("synthetic: need samples >= classes >= 1");
  }
  Rng rng(opt.seed);
  Dataset d;
  d.channels = opt.channels;
  d.height = opt.height;
  d.width = opt.width;
  d.classes = opt.classes;

  // One smooth plane wave per class and channel.
  struct Wave {
    double fy, fx, phase;
  };
  std::uniform_real_distribution<double> freq(0.5, 3.0), phase(0.0, 2.0 * std::numbers::pi);
  std::vector<Wave> waves(opt.classes * opt.channels);
  for (auto& w : waves) w = {freq(rng), freq(rng), phase(rng)};

  std::vector<int> labels(opt.samples);
  for (std::size_t i = 0; i < opt.samples; ++i) labels[i] = static_cast<int>(i % opt.classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::normal_distribution<double> noise(0.0, opt.noise);
  d.labels = labels;
  d.images.resize(opt.samples * d.image_size());
  for (std::size_t i = 0; i < opt.samples; ++i) {
    float* img = d.images.data() + i * d.image_size();
    for (std::size_t c = 0; c < opt.channels; ++c) {
      const Wave& wv = waves[static_cast<std::size_t>(labels[i]) * opt.channels + c];
      for (std::size_t y = 0; y < opt.height; ++y) {
        for (std::size_t x = 0; x < opt.width; ++x) {
          const double t = 2.0 * std::numbers::pi *
                               (wv.fy * static_cast<double>(y) / static_cast<double>(opt.height) +
                                wv.fx * static_cast<double>(x) / static_cast<double>(opt.width)) +
                           wv.phase;
          const double v = 0.5 + 0.35 * std::sin(t) + noise(rng);
          img[(c * opt.height + y) * opt.width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return d;
}

std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Split validation_split(const Dataset& data, std::size_t validation_size, std::uint64_t seed) {
  if (validation_size >= data.size()) {
    throw InvalidArgument("validation_split: holding out " + std::to_string(validation_size) + " of " +
                          std::to_string(data.size()) + " samples leaves no training data");
  }
  auto perm = split_permutation(data.size(), seed);
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(validation_size));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(validation_size), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train), data.subset(val)};
}

}  // namespace seqconv
