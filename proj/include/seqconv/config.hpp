// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqconv/trainer.hpp"

namespace seqconv {

enum class DataKind { synthetic, cifar10, cifar100 };

struct DataConfig {
  DataKind kind = DataKind::synthetic;
  /// CIFAR files, resolved against the --data directory when relative.
  std::vector<std::string> train_files;
  std::vector<std::string> test_files;
  /// Samples held out from the training files for validation; 0 = none.
  std::size_t validation_size = 0;
  /// Optional cap on the training samples used (taken after the split).
  std::size_t train_limit = 0;
  bool normalize = true;
  SyntheticOptions synthetic;
  /// Separate synthetic evaluation set size; 0 = none.
  std::size_t synthetic_eval_samples = 0;
};

/// One run: network, training and data settings.
struct RunConfig {
  NetworkSpec network;
  TrainConfig train;
  DataConfig data;
  bool deterministic = false;
};

/// Strict parse; errors are ConfigError with the JSON pointer of the key.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
/// The "network" section alone: a template reference or an explicit spec.
NetworkSpec parse_network_section(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig parse_train_section(const nlohmann::json& j, const std::string& path);

struct LoadedData {
  Dataset train;
  std::optional<Dataset> eval;
  std::optional<ChannelStats> stats;
};

/// Loads, splits and normalizes (statistics from the training part only).
/// `data_dir` prefixes relative CIFAR paths.
LoadedData load_data(const DataConfig& cfg, const std::string& data_dir, std::uint64_t seed);

}  // namespace seqconv
