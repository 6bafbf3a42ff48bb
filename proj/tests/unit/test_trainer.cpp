// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "seqconv/checkpoint.hpp"
#include "seqconv/errors.hpp"
#include "seqconv/trainer.hpp"

using namespace seqconv;

namespace {

NetworkSpec tiny_spec(std::size_t size = 8) {
  NetworkSpec spec = build_cifar_template(4, 1, 1, CifarVariant::basic);
  spec.input_height = size;
  spec.input_width = size;
  return spec;
}

Dataset tiny_data(std::size_t samples, std::uint64_t seed, std::size_t size = 8) {
  SyntheticOptions o;
  o.samples = samples;
  o.height = size;
  o.width = size;
  o.seed = seed;
  return synthetic_classification(o);
}

TrainConfig tiny_config(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.lr0 = 0.05;
  cfg.seed = 11;
  return cfg;
}

template <typename T>
std::vector<std::vector<T>> snapshot(const Network<T>& net) {
  std::vector<std::vector<T>> out;
  for (const auto& p : net.parameters()) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

template <typename T>
bool bitwise_same(const std::vector<std::vector<T>>& a, const std::vector<std::vector<T>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() || std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(T)) != 0) return false;
  }
  return true;
}

std::vector<int> predictions(Network<float>& net, const Dataset& data, std::size_t batch) {
  ForwardContext ctx;
  ctx.mode = Mode::eval;
  std::vector<int> out;
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < data.size(); s += batch) {
    idx.clear();
    for (std::size_t i = s; i < std::min(data.size(), s + batch); ++i) idx.push_back(i);
    const auto logits = net.forward(data.batch<float>(idx), ctx);
    const std::size_t classes = logits.dim(1);
    for (std::size_t n = 0; n < idx.size(); ++n) {
      int best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (logits[n * classes + c] > logits[n * classes + static_cast<std::size_t>(best)]) best = static_cast<int>(c);
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("Nesterov step on a scalar") {
    std::vector<double> p{1.0}, g{0.5}, v{0.0};
    sgd_step<double>(p, g, v, 0.1, 0.9, 1e-4);
    // Independent evaluation of the update rule.
    const double geff = 0.5 + 1e-4 * 1.0;
    const double vel = 0.9 * 0.0 + geff;
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * (geff + 0.9 * vel)).epsilon(1e-15));
    CHECK(p[0] == doctest::Approx(0.904981).epsilon(1e-12));
    CHECK(v[0] == doctest::Approx(0.5001).epsilon(1e-15));

    std::vector<double> q{1.0}, vq{0.0};
    sgd_step<double>(q, g, vq, 0.1, 0.0, 0.0);
    CHECK(q[0] == doctest::Approx(0.95));

    std::vector<double> z{2.0}, gz{0.0}, vz{0.0};
    sgd_step<double>(z, gz, vz, 0.1, 0.9, 0.0);
    CHECK(z[0] == 2.0);

    std::vector<double> bad{1.0, 2.0};
    CHECK_THROWS_AS(sgd_step<double>(bad, g, v, 0.1, 0.9, 0.0), InvalidArgument);
  }

  TEST_CASE("two steps match the recurrence") {
    double p = 0.3, v = 0.0;
    std::vector<double> pv{p}, vv{v};
    for (double grad : {0.7, -0.2}) {
      const std::vector<double> g{grad};
      sgd_step<double>(pv, g, vv, 0.05, 0.9, 1e-3);
      const double ge = grad + 1e-3 * p;
      v = 0.9 * v + ge;
      p -= 0.05 * (ge + 0.9 * v);
    }
    CHECK(pv[0] == doctest::Approx(p).epsilon(1e-15));
  }

  TEST_CASE("step schedule") {
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.schedule = cifar_schedule();
    CHECK(lr_at(0, cfg) == doctest::Approx(0.1));
    CHECK(lr_at(149, cfg) == doctest::Approx(0.1));
    CHECK(lr_at(150, cfg) == doctest::Approx(0.01));
    CHECK(lr_at(224, cfg) == doctest::Approx(0.01));
    CHECK(lr_at(225, cfg) == doctest::Approx(0.001));
    CHECK(lr_at(299, cfg) == doctest::Approx(0.001));
    for (int e = 1; e < cfg.epochs; ++e) CHECK(lr_at(e, cfg) <= lr_at(e - 1, cfg));
    CHECK_THROWS_AS(lr_at(300, cfg), InvalidArgument);
    CHECK_THROWS_AS(lr_at(-1, cfg), InvalidArgument);
    CHECK(step_schedule(30, 90).size() == 2);
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto bad = cfg;
    bad.lr0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.batch_size = 1;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.epochs = -1;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.dropout_rate = 1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.schedule = {{10, 10.0}, {10, 10.0}};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  }

  TEST_CASE("He initialization matches sqrt(2 / fan_in)") {
    Network<float> net(build_cifar_template(8, 4, 1, CifarVariant::basic));
    init_weights(net, 3);
    std::map<std::size_t, std::pair<double, std::size_t>> by_fan;  // fan_in -> (sum sq, count)
    for (const auto& p : net.parameters()) {
      if (p.kind != ParamKind::conv_kernel || p.name.find("layer2") != std::string::npos) continue;
      const std::size_t fan = p.tensor.numel() / p.tensor.dim(0);
      auto& acc = by_fan[fan];
      for (float v : p.tensor.values()) acc.first += static_cast<double>(v) * v;
      acc.second += p.tensor.numel();
    }
    REQUIRE(by_fan.count(576) == 1);
    const double s576 = std::sqrt(by_fan[576].first / static_cast<double>(by_fan[576].second));
    INFO("fan_in 576 std ", s576, " over ", by_fan[576].second);
    CHECK(s576 == doctest::Approx(0.0589).epsilon(0.03));
    for (const auto& [fan, acc] : by_fan) {
      if (acc.second < 5000) continue;
      const double s = std::sqrt(acc.first / static_cast<double>(acc.second));
      INFO("fan_in ", fan, " std ", s);
      CHECK(s == doctest::Approx(std::sqrt(2.0 / static_cast<double>(fan))).epsilon(0.05));
    }
  }

  TEST_CASE("initialization: zeroed layer2, Glorot classifier, determinism") {
    Network<float> a(tiny_spec()), b(tiny_spec()), c(tiny_spec());
    init_weights(a, 5);
    init_weights(b, 5);
    init_weights(c, 6);
    CHECK(bitwise_same(snapshot(a), snapshot(b)));
    CHECK_FALSE(bitwise_same(snapshot(a), snapshot(c)));
    std::size_t layer2_kernels = 0;
    for (const auto& p : a.parameters()) {
      if (p.kind == ParamKind::conv_kernel && p.name.find("layer2") != std::string::npos) {
        ++layer2_kernels;
        for (float v : p.tensor.values()) CHECK(v == 0.0f);
      }
      if (p.kind == ParamKind::bn_gamma && p.name.find("layer2") == std::string::npos)
        for (float v : p.tensor.values()) CHECK(v == 1.0f);
      if (p.kind == ParamKind::bn_beta || p.kind == ParamKind::fc_bias)
        for (float v : p.tensor.values()) CHECK(v == 0.0f);
      if (p.kind == ParamKind::fc_weight) {
        const double bound = std::sqrt(6.0 / static_cast<double>(p.tensor.dim(0) + p.tensor.dim(1)));
        double mx = 0.0;
        for (float v : p.tensor.values()) mx = std::max(mx, std::abs(static_cast<double>(v)));
        CHECK(mx <= bound);
        CHECK(mx > 0.8 * bound);
      }
    }
    CHECK(layer2_kernels > 0);
  }

  TEST_CASE("zero learning rate leaves parameters and losses unchanged") {
    Network<double> net(tiny_spec());
    init_weights(net, 1);
    const auto data = tiny_data(16, 2);
    std::vector<std::size_t> idx(16);
    for (std::size_t i = 0; i < 16; ++i) idx[i] = i;
    const auto x = data.batch<double>(idx);
    const auto params = net.parameters();
    auto state = make_optimizer_state<double>(params);
    const auto before = snapshot(net);
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    ForwardContext ctx;
    std::vector<double> losses;
    for (int step = 0; step < 3; ++step) {
      Tape<double> tape;
      Tensor<double> loss;
      {
        TapeGuard<double> guard(tape);
        loss = softmax_cross_entropy(net.forward(x, ctx), std::span<const int>(data.labels));
      }
      tape.backward(loss);
      sgd_step<double>(params, state, 0.0, cfg);
      losses.push_back(loss.item());
    }
    CHECK(bitwise_same(snapshot(net), before));
    CHECK(losses[0] == losses[1]);
    CHECK(losses[1] == losses[2]);
  }

  TEST_CASE("one step moves each parameter by lr (1 + m) times its gradient") {
    Network<double> net(tiny_spec());
    init_weights(net, 1);
    const auto data = tiny_data(16, 3);
    std::vector<std::size_t> idx(16);
    for (std::size_t i = 0; i < 16; ++i) idx[i] = i;
    const auto params = net.parameters();
    auto state = make_optimizer_state<double>(params);
    const auto before = snapshot(net);
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    ForwardContext ctx;
    Tape<double> tape;
    Tensor<double> loss;
    {
      TapeGuard<double> guard(tape);
      loss = softmax_cross_entropy(net.forward(data.batch<double>(idx), ctx), std::span<const int>(data.labels));
    }
    tape.backward(loss);
    const double lr = 0.1;
    sgd_step<double>(params, state, lr, cfg);
    double moved = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto g = params[i].tensor.grad();
      const auto now = params[i].tensor.values();
      for (std::size_t j = 0; j < now.size(); ++j) {
        CHECK(before[i][j] - now[j] == doctest::Approx(lr * 1.9 * g[j]).epsilon(1e-9).scale(1e-12));
        moved = std::max(moved, std::abs(before[i][j] - now[j]));
      }
    }
    CHECK(moved > 0.0);
  }

  TEST_CASE("training is deterministic for a fixed seed") {
    const auto data = tiny_data(64, 4);
    auto run = [&] {
      Network<float> net(tiny_spec());
      init_weights(net, 7);
      const auto h = train_loop(net, data, &data, tiny_config(2));
      return std::make_pair(h, snapshot(net));
    };
    const auto [h1, p1] = run();
    const auto [h2, p2] = run();
    REQUIRE(h1.epochs.size() == 2);
    CHECK(h1.epochs == h2.epochs);
    CHECK(bitwise_same(p1, p2));
    CHECK(h1.epochs[0].eval_err.has_value());
  }

  TEST_CASE("a non-finite loss names the epoch and batch") {
    auto data = tiny_data(32, 5);
    data.images[7] = std::numeric_limits<float>::quiet_NaN();
    Network<float> net(tiny_spec());
    init_weights(net, 1);
    auto cfg = tiny_config(1);
    cfg.batch_size = 32;
    try {
      train_loop(net, data, nullptr, cfg);
      FAIL("NaN input trained without error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch 0, batch 0") != std::string::npos);
    }
  }

  TEST_CASE("batches that batch norm cannot handle are rejected") {
    Network<float> net(tiny_spec());
    auto cfg = tiny_config(1);
    cfg.batch_size = 16;
    CHECK_THROWS_AS(train_loop(net, tiny_data(17, 1), nullptr, cfg), InvalidArgument);
    CHECK_THROWS_AS(train_loop(net, tiny_data(8, 1), nullptr, cfg), InvalidArgument);
    CHECK_NOTHROW(train_loop(net, tiny_data(18, 1), nullptr, cfg));
  }

  TEST_CASE("evaluate: chance level, self-consistent labels, top-5 bound") {
    Network<float> net(tiny_spec());
    init_weights(net, 9);
    auto data = tiny_data(1000, 6);
    {
      ForwardContext train;  // populate the running statistics
      std::vector<std::size_t> idx(200);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      net.forward(data.batch<float>(idx), train);
    }
    Rng rng(12);
    std::uniform_int_distribution<int> label(0, 9);
    for (auto& l : data.labels) l = label(rng);
    const auto chance = evaluate(net, data, 100);
    CHECK(std::abs(chance.top1_err - 0.9) < 0.034);
    CHECK(chance.top5_err <= chance.top1_err);
    CHECK(std::isfinite(chance.mean_loss));

    data.labels = predictions(net, data, 100);
    const auto self = evaluate(net, data, 100);
    CHECK(self.top1_err == 0.0);
    CHECK(self.top5_err == 0.0);
    CHECK_THROWS_AS(evaluate(net, Dataset{}, 10), InvalidArgument);
  }

  TEST_CASE("history CSV round trip") {
    History h;
    h.epochs.push_back({0, 0.1, 2.302585092994046, 0.125, 0.8});
    h.epochs.push_back({1, 0.1, 1.0 / 3.0, 0.5, std::nullopt});
    const auto back = parse_history_csv(history_csv(h));
    CHECK(back.epochs == h.epochs);
    CHECK(history_csv(h).rfind("epoch,lr,train_loss,train_acc,eval_err\n", 0) == 0);
  }

  TEST_CASE("checkpoint encode/decode round trip") {
    Checkpoint c;
    c.precision = Precision::double_;
    c.metadata["note"] = "x";
    c.tensors.push_back({"a", {2, 3}, {1, 2, 3, 4, 5, 6.5}});
    c.tensors.push_back({"b", {1}, {-0.25}});
    const auto bytes = encode_checkpoint(c);
    CHECK(std::memcmp(bytes.data(), checkpoint_magic, 8) == 0);
    const auto d = decode_checkpoint(bytes);
    CHECK(d.precision == Precision::double_);
    CHECK(d.metadata == c.metadata);
    REQUIRE(d.tensors.size() == 2);
    CHECK(d.at("a").shape == Shape{2, 3});
    CHECK(d.at("a").values == c.tensors[0].values);
    CHECK(d.find("missing") == nullptr);
    CHECK_THROWS_AS(d.at("missing"), InvalidArgument);
  }

  TEST_CASE("checkpoint corruption reports byte offsets") {
    Checkpoint c;
    c.tensors.push_back({"a", {4}, {1, 2, 3, 4}});
    const auto good = encode_checkpoint(c);
    auto offset_of = [](std::vector<std::uint8_t> b) -> std::ptrdiff_t {
      try {
        decode_checkpoint(b);
      } catch (const CorruptFile& e) {
        return static_cast<std::ptrdiff_t>(e.offset());
      }
      return -1;
    };
    auto bad = good;
    bad[0] = 'X';
    CHECK(offset_of(bad) == 0);
    bad = good;
    bad[8] = 9;  // version
    CHECK(offset_of(bad) == 8);
    bad = good;
    bad[12] = 7;  // dtype
    CHECK(offset_of(bad) == 12);
    bad = good;
    bad.resize(good.size() - 3);
    const auto cut = offset_of(bad);
    CHECK(cut > 12);
    CHECK(cut <= static_cast<std::ptrdiff_t>(bad.size()));
    bad = good;
    bad.push_back(0);
    CHECK(offset_of(bad) == static_cast<std::ptrdiff_t>(good.size()));
  }

  TEST_CASE("network checkpoints restore parameters and statistics exactly") {
    Network<float> a(tiny_spec());
    init_weights(a, 2);
    train_loop(a, tiny_data(32, 7), nullptr, tiny_config(1));
    Checkpoint c;
    store_network(a, c);
    Network<float> b(tiny_spec());
    restore_network(b, decode_checkpoint(encode_checkpoint(c)));
    CHECK(bitwise_same(snapshot(a), snapshot(b)));
    const auto x = tiny_data(10, 8).batch<float>(std::vector<std::size_t>{0, 1, 2, 3});
    ForwardContext ctx;
    ctx.mode = Mode::eval;
    const auto ya = a.forward(x, ctx), yb = b.forward(x, ctx);
    CHECK(std::memcmp(ya.values().data(), yb.values().data(), ya.numel() * sizeof(float)) == 0);

    Network<float> other(build_cifar_template(4, 2, 1, CifarVariant::basic));
    CHECK_THROWS_AS(restore_network(other, c), InvalidArgument);
  }

  TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run") {
    const auto data = tiny_data(48, 9);
    auto cfg = tiny_config(2);
    cfg.augment = true;
    cfg.dropout_rate = 0.1;

    Network<float> straight(tiny_spec());
    init_weights(straight, 4);
    const auto h_straight = train_loop(straight, data, &data, cfg);

    Network<float> first(tiny_spec());
    init_weights(first, 4);
    auto state = make_trainer_state(first, cfg);
    auto one = cfg;
    one.epochs = 1;
    train_loop(first, data, &data, one, state);
    Checkpoint c;
    store_network(first, c);
    store_trainer_state(first, state, c);
    const auto bytes = encode_checkpoint(c);

    Network<float> resumed(tiny_spec());
    const auto loaded = decode_checkpoint(bytes);
    restore_network(resumed, loaded);
    auto state2 = make_trainer_state(resumed, cfg);
    restore_trainer_state(resumed, loaded, state2);
    CHECK(state2.next_epoch == 1);
    const auto h_resumed = train_loop(resumed, data, &data, cfg, state2);

    CHECK(h_resumed.epochs == h_straight.epochs);
    CHECK(bitwise_same(snapshot(resumed), snapshot(straight)));
  }
}
