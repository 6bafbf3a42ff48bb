// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqconv/data.hpp"
#include "seqconv/network.hpp"

namespace seqconv {

enum class Precision { single, double_ };
const char* to_string(Precision p);

struct ScheduleStep {
  int epoch = 0;
  double divisor = 10.0;
  bool operator==(const ScheduleStep&) const = default;
};

struct TrainConfig {
  double lr0 = 0.1;
  double momentum = 0.9;  // Nesterov
  double weight_decay = 1e-4;
  /// Apply weight decay to BN gamma/beta as well as conv/fc weights.
  bool decay_batch_norm = true;
  /// Applied to fc bias when true.
  bool decay_bias = true;
  std::vector<ScheduleStep> schedule;
  int epochs = 1;
  std::size_t batch_size = 64;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::single;
  /// Pad/crop/flip augmentation of training batches.
  bool augment = false;
  /// Stop after the first epoch whose train accuracy reaches this value.
  std::optional<double> target_train_accuracy;

  /// Throws InvalidArgument on a violated invariant.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Divide by 10 at epochs 150 and 225.
std::vector<ScheduleStep> cifar_schedule();
/// Divide by 10 every `every` epochs up to `epochs`.
std::vector<ScheduleStep> step_schedule(int every, int epochs);

/// Piecewise-constant learning rate for 0 <= epoch < cfg.epochs.
double lr_at(int epoch, const TrainConfig& cfg);

/// One Nesterov SGD update in place:
///   g = grad + wd*param;  v = m*v + g;  param -= lr*(g + m*v)
template <typename T>
void sgd_step(std::span<T> param, std::span<const T> grad, std::span<T> velocity, double lr, double momentum,
              double weight_decay);

template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> velocity;  // one buffer per parameter, zero at start
};

template <typename T>
OptimizerState<T> make_optimizer_state(std::span<const NamedParam<T>> params);

/// Updates every parameter from its gradient.
template <typename T>
void sgd_step(std::span<const NamedParam<T>> params, OptimizerState<T>& state, double lr, const TrainConfig& cfg);

/// He normal kernels (std sqrt(2 / fan_in)), Glorot uniform classifier
/// weight, zero bias, BN gamma 1 / beta 0, then zero_init_block on every
/// residual block. Deterministic in `seed`.
template <typename T>
void init_weights(Network<T>& net, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> eval_err;
  bool operator==(const EpochRecord&) const = default;
};

struct History {
  std::vector<EpochRecord> epochs;
};

void write_history_csv(const std::string& path, const History& h);
std::string history_csv(const History& h);
History read_history_csv(const std::string& path);
History parse_history_csv(const std::string& text);

struct EvalResult {
  double top1_err = 0.0;
  double top5_err = 0.0;
  double mean_loss = 0.0;
};

/// Eval-mode forward in batches. top-5 uses min(5, classes).
template <typename T>
EvalResult evaluate(Network<T>& net, const Dataset& data, std::size_t batch_size = 256);

/// Resumable training state beyond the network parameters.
template <typename T>
struct TrainerState {
  OptimizerState<T> optimizer;
  Rng rng;          // shuffling and dropout
  Rng augment_rng;  // augmentation draws
  int next_epoch = 0;
  History history;
};

template <typename T>
TrainerState<T> make_trainer_state(const Network<T>& net, const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs epochs state.next_epoch .. cfg.epochs-1. Each epoch: seeded shuffle,
/// mini-batches (last partial batch kept), train-mode forward, backward,
/// Nesterov step. `eval` (optional) is scored after every epoch. Throws
/// NumericError naming epoch and batch on a non-finite loss, and
/// InvalidArgument when a batch would hold a single sample.
template <typename T>
History train_loop(Network<T>& net, const Dataset& train, const Dataset* eval, const TrainConfig& cfg,
                   TrainerState<T>& state, const EpochCallback& on_epoch = {});

template <typename T>
History train_loop(Network<T>& net, const Dataset& train, const Dataset* eval, const TrainConfig& cfg);

}  // namespace seqconv
