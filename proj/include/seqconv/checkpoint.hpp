// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqconv/trainer.hpp"

namespace seqconv {

/// Layout (all integers little-endian):
///   magic "SQCVCKPT" | u32 version | u32 dtype (0 f32, 1 f64)
///   u64 metadata bytes | metadata (UTF-8 JSON)
///   u64 tensor count | per tensor: u32 name bytes, name, u32 rank,
///   u64 dims[rank], values (dtype, little-endian, row-major)
/// See docs/checkpoint-format.md.
inline constexpr char checkpoint_magic[8] = {'S', 'Q', 'C', 'V', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t checkpoint_version = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  Precision precision = Precision::single;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
  /// Throws InvalidArgument if absent.
  const CheckpointTensor& at(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws CorruptFile with the byte offset of the first inconsistency.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// Parameters ("param/<name>"), batch-norm statistics ("bn/<name>.mean",
/// ".var", ".populated") and the network spec under metadata "network".
template <typename T>
void store_network(Network<T>& net, Checkpoint& ckpt);
/// Loads every parameter and statistic of `net` by name; throws
/// InvalidArgument on a missing name or shape mismatch.
template <typename T>
void restore_network(Network<T>& net, const Checkpoint& ckpt);

/// Velocity buffers ("opt/<param name>"), generator states, next epoch and
/// history under metadata "trainer".
template <typename T>
void store_trainer_state(const Network<T>& net, const TrainerState<T>& state, Checkpoint& ckpt);
template <typename T>
void restore_trainer_state(const Network<T>& net, const Checkpoint& ckpt, TrainerState<T>& state);

}  // namespace seqconv
