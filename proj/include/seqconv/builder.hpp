// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqconv/blocks.hpp"

namespace seqconv {

struct StemLayer {
  std::size_t out_channels = 16;
  std::size_t kernel = 3;
  int stride = 1;
  bool operator==(const StemLayer&) const = default;
};

enum class EntryKind {
  none,        // stage starts directly with its residual blocks
  layer,       // a single aggregated layer producing the stage width
  downsample,  // extension + concatenation + grouped stride-2 downsizing
};

/// How a stage reaches its width from the previous stage's output.
struct EntrySpec {
  EntryKind kind = EntryKind::none;
  Aggregation aggregation = Aggregation::windowed;
  int growth = 0;  // k of the entry layer
  int subgroups = 1;
  int downsize_groups = 0;  // downsample only
  bool operator==(const EntrySpec&) const = default;
};

struct StageSpec {
  std::size_t width = 0;
  int growth = 0;     // k of the residual blocks
  int subgroups = 1;  // c
  int blocks = 1;     // N
  Aggregation aggregation = Aggregation::windowed;
  EntrySpec entry;
  bool operator==(const StageSpec&) const = default;
};

/// Declarative description of a sequentially aggregated network.
struct NetworkSpec {
  std::string name;
  std::size_t in_channels = 3;
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  Transform transform = Transform::basic;
  std::vector<StemLayer> stem;
  std::vector<StageSpec> stages;
  std::size_t head_width = 0;  // 1x1 conv before pooling; 0 disables it
  std::size_t classes = 10;
  bool operator==(const NetworkSpec&) const = default;
};

enum class CifarVariant { basic, bottleneck };

/// CIFAR template: 3x3 stem of 16, stages of width 16r/32r/48r, first layer
/// dense, down-sampling blocks between stages with width/k downsize groups,
/// 1x1 conv of 48r, pooling and classifier. `blocks` gives N per stage.
NetworkSpec build_cifar_template(int k, int r, std::array<int, 3> blocks, CifarVariant variant,
                                 std::size_t classes = 10, Aggregation aggregation = Aggregation::windowed);
inline NetworkSpec build_cifar_template(int k, int r, int n, CifarVariant variant, std::size_t classes = 10) {
  return build_cifar_template(k, r, {n, n, n}, variant, classes);
}

/// ImageNet templates: "SeqResNeXt-24", "SeqResNet-B42", "SeqResNet-B22".
NetworkSpec build_imagenet_template(const std::string& name);
std::vector<std::string> imagenet_template_names();

/// Throws InvalidArgument naming the first inconsistent stage.
void validate(const NetworkSpec& spec);

// Typed sub-specs shared by instantiation and complexity counting.
SeqConvConfig entry_layer_config(const NetworkSpec& spec, std::size_t stage, std::size_t in_width);
DownsampleBlockSpec downsample_spec(const NetworkSpec& spec, std::size_t stage, std::size_t in_width);
ResidualBlockSpec residual_block_spec(const NetworkSpec& spec, std::size_t stage);

/// One row of the flattened layer listing.
struct LayerInfo {
  std::string path;  // e.g. "stage2/block0/layer2"
  std::string kind;  // conv | seqconv | downsize | fc
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  std::size_t kernel = 0;
  int stride = 1;
  int conv_groups = 1;       // plain convs
  SeqConvConfig seq;         // seqconv rows
  int window = 0;            // resolved g' for windowed rows
  std::uint64_t conv_params = 0;
  std::uint64_t bn_params = 0;
  std::uint64_t fc_params = 0;
  std::uint64_t macs = 0;
  std::string stage;  // "stem", "stage1", ..., "head"
};

/// Every layer in forward order, with shapes at the spec's input geometry.
std::vector<LayerInfo> layer_plan(const NetworkSpec& spec);
std::vector<LayerInfo> layer_plan(const NetworkSpec& spec, std::size_t height, std::size_t width);

struct StageComplexity {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct ComplexityReport {
  std::uint64_t total_params = 0;
  std::uint64_t conv_params = 0;
  std::uint64_t bn_params = 0;
  std::uint64_t fc_params = 0;
  std::uint64_t macs = 0;
  std::size_t height = 0, width = 0;
  std::vector<StageComplexity> stages;
};

/// Exact parameter counts (conv kernels, BN gamma/beta, classifier weight and
/// bias; no running statistics) and MACs at the spec's input geometry.
ComplexityReport count_params(const NetworkSpec& spec);
/// Multiply-accumulates for one sample of size height x width (conv and fc
/// only; one MAC counts as one FLOP).
std::uint64_t count_macs(const NetworkSpec& spec, std::size_t height, std::size_t width);

/// Deterministic human-readable layer listing.
std::string graph_dump(const NetworkSpec& spec);

nlohmann::json to_json(const NetworkSpec& spec);
/// Strict parse: unknown keys and wrong types raise ConfigError with the
/// JSON pointer of the offending key, prefixed by `path`.
NetworkSpec network_spec_from_json(const nlohmann::json& j, const std::string& path = "");
nlohmann::json to_json(const ComplexityReport& report);

}  // namespace seqconv
