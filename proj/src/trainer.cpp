// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include "seqconv/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "seqconv/errors.hpp"

namespace seqconv {

const char* to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw InvalidArgument("train: lr0 must be > 0");
  if (epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("train: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train: weight_decay must be >= 0");
  if (batch_size < 2) throw InvalidArgument("train: batch_size must be >= 2 (batch norm needs two samples)");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidArgument("train: dropout_rate must be in [0, 1)");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].epoch < 0 || !(schedule[i].divisor > 0.0)) {
      throw InvalidArgument("train: schedule step " + std::to_string(i) + " needs epoch >= 0 and divisor > 0");
    }
    if (i > 0 && schedule[i].epoch <= schedule[i - 1].epoch) {
      throw InvalidArgument("train: schedule epochs must be strictly increasing");
    }
  }
}

std::vector<ScheduleStep> cifar_schedule() { return {{150, 10.0}, {225, 10.0}}; }

std::vector<ScheduleStep> step_schedule(int every, int epochs) {
  if (every < 1) throw InvalidArgument("step_schedule: period must be >= 1");
  std::vector<ScheduleStep> s;
  for (int e = every; e < epochs; e += every) s.push_back({e, 10.0});
  return s;
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw InvalidArgument("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + ")");
  }
  double lr = cfg.lr0;
  for (const auto& step : cfg.schedule) {
    if (epoch >= step.epoch) lr /= step.divisor;
  }
  return lr;
}

template <typename T>
void sgd_step(std::span<T> param, std::span<const T> grad, std::span<T> velocity, double lr, double momentum,
              double weight_decay) {
  if (grad.size() != param.size() || velocity.size() != param.size()) {
    throw InvalidArgument("sgd_step: parameter/gradient/velocity sizes " + std::to_string(param.size()) + "/" +
                          std::to_string(grad.size()) + "/" + std::to_string(velocity.size()) + " differ");
  }
  const T m = static_cast<T>(momentum), wd = static_cast<T>(weight_decay), rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i] + wd * param[i];
    velocity[i] = m * velocity[i] + g;
    param[i] -= rate * (g + m * velocity[i]);
  }
}

template <typename T>
OptimizerState<T> make_optimizer_state(std::span<const NamedParam<T>> params) {
  OptimizerState<T> s;
  for (const auto& p : params) s.velocity.emplace_back(p.tensor.numel(), T{0});
  return s;
}

namespace {

double decay_for(ParamKind kind, const TrainConfig& cfg) {
  switch (kind) {
    case ParamKind::bn_gamma:
    case ParamKind::bn_beta:
      return cfg.decay_batch_norm ? cfg.weight_decay : 0.0;
    case ParamKind::fc_bias:
      return cfg.decay_bias ? cfg.weight_decay : 0.0;
    default:
      return cfg.weight_decay;
  }
}

}  // namespace

template <typename T>
void sgd_step(std::span<const NamedParam<T>> params, OptimizerState<T>& state, double lr, const TrainConfig& cfg) {
  if (state.velocity.size() != params.size()) {
    throw InvalidArgument("sgd_step: optimizer state holds " + std::to_string(state.velocity.size()) +
                          " buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> t = params[i].tensor;
    auto g = t.grad();
    if (g.empty()) continue;
    sgd_step<T>(t.values(), g, state.velocity[i], lr, cfg.momentum, decay_for(params[i].kind, cfg));
  }
}

template <typename T>
void init_weights(Network<T>& net, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : net.parameters()) {
    Tensor<T> t = p.tensor;
    auto v = t.values();
    switch (p.kind) {
      case ParamKind::conv_kernel: {
        const double fan_in = static_cast<double>(t.numel() / t.dim(0));
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (auto& x : v) x = static_cast<T>(dist(rng));
        break;
      }
      case ParamKind::fc_weight: {
        const double bound = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& x : v) x = static_cast<T>(dist(rng));
        break;
      }
      case ParamKind::bn_gamma:
        std::fill(v.begin(), v.end(), T{1});
        break;
      case ParamKind::bn_beta:
      case ParamKind::fc_bias:
        std::fill(v.begin(), v.end(), T{0});
        break;
    }
  }
  for (auto* block : net.residual_blocks()) zero_init_block(*block);
}

// ---------------------------------------------------------------------------
// History CSV

std::string history_csv(const History& h) {
  std::ostringstream out;
  out << "epoch,lr,train_loss,train_acc,eval_err\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : h.epochs) {
    out << r.epoch << "," << num(r.lr) << "," << num(r.train_loss) << "," << num(r.train_acc) << ","
        << (r.eval_err ? num(*r.eval_err) : "") << "\n";
  }
  return out.str();
}

void write_history_csv(const std::string& path, const History& h) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("history: cannot write '" + path + "'");
  out << history_csv(h);
}

History parse_history_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "epoch,lr,train_loss,train_acc,eval_err") throw InvalidArgument("history: unexpected header '" + line + "'");
  History h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 4) cells.emplace_back();
    if (cells.size() != 5) throw InvalidArgument("history: malformed row '" + line + "'");
    EpochRecord r;
    r.epoch = std::stoi(cells[0]);
    r.lr = std::stod(cells[1]);
    r.train_loss = std::stod(cells[2]);
    r.train_acc = std::stod(cells[3]);
    if (!cells[4].empty()) r.eval_err = std::stod(cells[4]);
    h.epochs.push_back(r);
  }
  return h;
}

History read_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("history: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_history_csv(buf.str());
}

// ---------------------------------------------------------------------------
// Evaluation and training

template <typename T>
EvalResult evaluate(Network<T>& net, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw InvalidArgument("evaluate: empty dataset");
  if (batch_size == 0) throw InvalidArgument("evaluate: batch_size must be >= 1");
  const int top = static_cast<int>(std::min<std::size_t>(5, data.classes));
  ForwardContext ctx;
  ctx.mode = Mode::eval;
  std::size_t wrong1 = 0, wrong5 = 0;
  double loss = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<T> logits = net.forward(data.batch<T>(idx), ctx);
    const std::span<const int> labels(data.labels.data() + start, end - start);
    loss += static_cast<double>(softmax_cross_entropy(logits, labels).item()) * static_cast<double>(end - start);
    const auto pred = argmax_rows(logits);
    for (std::size_t n = 0; n < labels.size(); ++n) {
      if (pred[n] != labels[n]) ++wrong1;
      if (!in_top_k(logits, n, labels[n], top)) ++wrong5;
    }
  }
  const auto total = static_cast<double>(data.size());
  return {static_cast<double>(wrong1) / total, static_cast<double>(wrong5) / total, loss / total};
}

template <typename T>
TrainerState<T> make_trainer_state(const Network<T>& net, const TrainConfig& cfg) {
  const auto params = net.parameters();
  TrainerState<T> s;
  s.optimizer = make_optimizer_state<T>(params);
  s.rng.seed(cfg.seed);
  s.augment_rng.seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

template <typename T>
History train_loop(Network<T>& net, const Dataset& train, const Dataset* eval, const TrainConfig& cfg,
                   TrainerState<T>& state, const EpochCallback& on_epoch) {
  cfg.validate();
  train.check();
  const std::size_t n = train.size();
  if (n == 0) throw InvalidArgument("train: empty training set");
  if (cfg.batch_size > n) {
    throw InvalidArgument("train: batch_size " + std::to_string(cfg.batch_size) + " exceeds the " +
                          std::to_string(n) + " training samples");
  }
  if (n % cfg.batch_size == 1) {
    throw InvalidArgument("train: the last batch would hold a single sample (" + std::to_string(n) + " samples, batch " +
                          std::to_string(cfg.batch_size) + "); batch norm needs at least two");
  }
  const auto params = net.parameters();
  if (state.optimizer.velocity.size() != params.size()) state.optimizer = make_optimizer_state<T>(params);

  ForwardContext ctx;
  ctx.mode = Mode::train;
  ctx.rng = &state.rng;
  ctx.dropout = cfg.dropout_rate;

  std::vector<std::size_t> order(n);
  std::vector<std::size_t> idx;
  std::vector<float> scratch(train.image_size());
  for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), state.rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
      Tensor<T> x = train.batch<T>(idx);
      if (cfg.augment) {
        auto xv = x.values();
        const std::size_t sz = train.image_size();
        for (std::size_t i = 0; i < idx.size(); ++i) {
          augment(train.image(idx[i]), train.channels, train.height, train.width, state.augment_rng, scratch);
          std::transform(scratch.begin(), scratch.end(), xv.begin() + static_cast<std::ptrdiff_t>(i * sz),
                         [](float p) { return static_cast<T>(p); });
        }
      }
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train.labels[idx[i]];

      Tape<T> tape;
      Tensor<T> logits, loss;
      {
        TapeGuard<T> guard(tape);
        logits = net.forward(x, ctx);
        loss = softmax_cross_entropy(logits, std::span<const int>(labels));
      }
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      }
      for (const auto& p : params) {
        Tensor<T> t = p.tensor;
        t.zero_grad();
      }
      tape.backward(loss);
      sgd_step<T>(params, state.optimizer, lr, cfg);

      loss_sum += lv * static_cast<double>(idx.size());
      const auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < idx.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    if (eval != nullptr) rec.eval_err = evaluate(net, *eval, std::max<std::size_t>(cfg.batch_size, 2)).top1_err;
    state.history.epochs.push_back(rec);
    state.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(rec);
    if (cfg.target_train_accuracy && rec.train_acc >= *cfg.target_train_accuracy) break;
  }
  return state.history;
}

template <typename T>
History train_loop(Network<T>& net, const Dataset& train, const Dataset* eval, const TrainConfig& cfg) {
  TrainerState<T> state = make_trainer_state(net, cfg);
  return train_loop(net, train, eval, cfg, state);
}

#define SEQCONV_INSTANTIATE(T)                                                                                   \
  template void sgd_step<T>(std::span<T>, std::span<const T>, std::span<T>, double, double, double);            \
  template OptimizerState<T> make_optimizer_state<T>(std::span<const NamedParam<T>>);                           \
  template void sgd_step<T>(std::span<const NamedParam<T>>, OptimizerState<T>&, double, const TrainConfig&);    \
  template void init_weights<T>(Network<T>&, std::uint64_t);                                                    \
  template EvalResult evaluate<T>(Network<T>&, const Dataset&, std::size_t);                                    \
  template TrainerState<T> make_trainer_state<T>(const Network<T>&, const TrainConfig&);                        \
  template History train_loop<T>(Network<T>&, const Dataset&, const Dataset*, const TrainConfig&, TrainerState<T>&, \
                                 const EpochCallback&);                                                         \
  template History train_loop<T>(Network<T>&, const Dataset&, const Dataset*, const TrainConfig&);

SEQCONV_INSTANTIATE(float)
SEQCONV_INSTANTIATE(double)

}  // namespace seqconv
