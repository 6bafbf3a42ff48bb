// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include <doctest.h>

#include <cstring>

#include "../support/random_layers.hpp"
#include "seqconv/blocks.hpp"
#include "seqconv/errors.hpp"
#include "seqconv/gradcheck.hpp"

using namespace seqconv;

namespace {

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.numel() * sizeof(T)) == 0;
}

template <typename T>
void randomize_block(ResidualBlock<T>& b, std::uint64_t seed) {
  testing::randomize(b.layer1(), seed);
  testing::randomize(b.layer2(), seed + 1);
}

}  // namespace

TEST_SUITE("blocks") {
  TEST_CASE("a zero-initialized block is the identity map") {
    for (auto tr : {Transform::basic, Transform::bottleneck}) {
      ResidualBlock<float> block(ResidualBlockSpec::make(16, 4, 1, tr));
      randomize_block(block, 1);
      zero_init_block(block);
      const auto x = testing::random_input<float>({3, 16, 6, 6}, 2);
      ForwardContext ctx;
      CHECK(bitwise_equal(block.forward(x, ctx), x));
    }
  }

  TEST_CASE("zero input with zero beta gives zero output") {
    ResidualBlock<double> block(ResidualBlockSpec::make(8, 4, 1, Transform::basic));
    randomize_block(block, 3);
    for (auto* layer : {&block.layer1(), &block.layer2()})
      for (auto& g : layer->groups())
        for (auto& u : g.units())
          for (auto& v : u.bn().beta().values()) v = 0.0;
    ForwardContext ctx;
    const auto y = block.forward(Tensor<double>({2, 8, 4, 4}, 0.0), ctx);
    for (double v : y.values()) CHECK(v == 0.0);
  }

  TEST_CASE("gradient of sum(y) w.r.t. x includes the identity path") {
    ResidualBlock<double> block(ResidualBlockSpec::make(8, 4, 1, Transform::basic));
    randomize_block(block, 4);
    ForwardContext ctx;
    auto x = testing::random_input<double>({2, 8, 4, 4}, 5);
    x.set_requires_grad(true);
    const auto rep = grad_check([&](const Tensor<double>& in) { return sum(block.forward(in, ctx)); }, x);
    INFO("max rel err ", rep.max_rel_err);
    CHECK(rep.pass);
    // With the body zeroed, only the shortcut remains: d sum(y) / dx = 1.
    zero_init_block(block);
    Tape<double> tape;
    {
      TapeGuard<double> guard(tape);
      auto x2 = testing::random_input<double>({2, 8, 4, 4}, 6);
      x2.set_requires_grad(true);
      tape.backward(sum(block.forward(x2, ctx)));
      for (double g : x2.grad()) CHECK(g == doctest::Approx(1.0));
    }
  }

  TEST_CASE("width mismatches are rejected") {
    ResidualBlock<float> block(ResidualBlockSpec::make(8, 4, 1, Transform::basic));
    ForwardContext ctx;
    CHECK_THROWS_AS(block.forward(Tensor<float>({2, 12, 4, 4}), ctx), InvalidArgument);
    ResidualBlockSpec bad = ResidualBlockSpec::make(8, 4, 1, Transform::basic);
    bad.layer2.groups = 3;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  }

  TEST_CASE("layer2 is flagged for zero init and ends linearly") {
    const auto spec = ResidualBlockSpec::make(32, 8, 1, Transform::basic);
    CHECK(spec.zero_init_layer2);
    CHECK(spec.layer1.output_width() == 32);
    CHECK(spec.layer2.output_width() == 32);
    CHECK(spec.layer1.aggregation == Aggregation::windowed);
    CHECK(spec.layer2.aggregation == Aggregation::windowed);
    CHECK_FALSE(spec.layer2.final_activation);
  }

  TEST_CASE("zero_init_block: layer1 untouched, idempotent, trainable") {
    ResidualBlock<double> block(ResidualBlockSpec::make(8, 4, 1, Transform::basic));
    randomize_block(block, 7);
    std::vector<NamedParam<double>> before;
    block.layer1().collect("l1", before);
    std::vector<std::vector<double>> saved;
    for (const auto& p : before) saved.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    zero_init_block(block);
    std::vector<NamedParam<double>> l2;
    block.layer2().collect("l2", l2);
    std::vector<std::vector<double>> once;
    for (const auto& p : l2) {
      once.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
      for (double v : p.tensor.values()) {
        if (p.kind == ParamKind::conv_kernel || p.kind == ParamKind::bn_beta) CHECK(v == 0.0);
        if (p.kind == ParamKind::bn_gamma) CHECK(v == 1.0);
      }
    }
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(std::equal(saved[i].begin(), saved[i].end(), before[i].tensor.values().begin()));
    }
    zero_init_block(block);
    for (std::size_t i = 0; i < l2.size(); ++i) {
      CHECK(std::equal(once[i].begin(), once[i].end(), l2[i].tensor.values().begin()));
    }

    // The loss gradient w.r.t. the zeroed kernels is nonzero and matches
    // central differences at the initialization point.
    ForwardContext ctx;
    const auto x = testing::random_input<double>({3, 8, 4, 4}, 8);
    const auto w = testing::random_input<double>({3, 8, 4, 4}, 9);
    std::vector<Tensor<double>> kernels;
    for (const auto& p : l2)
      if (p.kind == ParamKind::conv_kernel) kernels.push_back(p.tensor);
    const auto rep = grad_check([&] { return sum(mul(block.forward(x, ctx), w)); }, kernels);
    INFO("max rel err ", rep.max_rel_err);
    CHECK(rep.pass);
    Tape<double> tape;
    TapeGuard<double> guard(tape);
    for (auto& k : kernels) k.set_requires_grad(true);
    tape.backward(sum(mul(block.forward(x, ctx), w)));
    double norm = 0.0;
    for (const auto& k : kernels)
      for (double g : k.grad()) norm += g * g;
    CHECK(norm > 1e-6);
  }

  TEST_CASE("downsample block: r = 4, k = 8 arithmetic") {
    DownsampleBlockSpec spec;
    spec.in_width = 64;
    spec.extension.groups = 8;
    spec.extension.growth = 8;
    spec.extension.aggregation = Aggregation::windowed;
    spec.downsize_groups = 128 / 8;
    spec.validate();
    CHECK(spec.out_width() == 128);
    DownsampleBlock<float> block(spec);
    CHECK(block.downsize().conv().kernel().shape() == Shape{128, 8, 3, 3});
    ForwardContext ctx;
    const auto y = block.forward(testing::random_input<float>({2, 64, 8, 8}, 10), ctx);
    CHECK(y.shape() == Shape{2, 128, 4, 4});
    // Element count changes by out_width / (4 in_width).
    CHECK(static_cast<double>(y.numel()) / (2.0 * 64 * 8 * 8) == doctest::Approx(128.0 / (4.0 * 64)));

    DownsampleBlockSpec bad = spec;
    bad.downsize_groups = 5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  }

  TEST_CASE("downsample block: odd extents use floor arithmetic") {
    DownsampleBlockSpec spec;
    spec.in_width = 8;
    spec.extension.groups = 2;
    spec.extension.growth = 4;
    spec.extension.aggregation = Aggregation::windowed;
    spec.downsize_groups = 4;
    DownsampleBlock<float> block(spec);
    ForwardContext ctx;
    CHECK(block.forward(testing::random_input<float>({2, 8, 33, 33}, 11), ctx).shape() == Shape{2, 16, 17, 17});
  }

  TEST_CASE("downsizing keeps each k-wide group independent") {
    DownsampleBlockSpec spec;
    spec.in_width = 8;
    spec.extension.groups = 2;
    spec.extension.growth = 4;
    spec.extension.aggregation = Aggregation::windowed;
    spec.downsize_groups = 16 / 4;
    DownsampleBlock<double> block(spec);
    auto& unit = block.downsize();
    for (auto& v : unit.conv().kernel().values()) v = 0.1;
    auto z = testing::random_input<double>({2, 16, 6, 6}, 12);
    const auto a = unit.forward(z, Mode::train);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 36; ++i) z[(n * 16 + 5) * 36 + i] *= 3.0;  // channel 5 lives in group 1
    const auto b = unit.forward(z, Mode::train);
    for (std::size_t c = 0; c < 16; ++c) {
      bool same = true;
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t i = 0; i < 9; ++i) same &= a[(n * 16 + c) * 9 + i] == b[(n * 16 + c) * 9 + i];
      CHECK(same == (c / 4 != 1));
    }
  }

  TEST_CASE("residual output keeps the group decomposition for a downstream window") {
    ResidualBlock<float> first(ResidualBlockSpec::make(16, 4, 1, Transform::basic));
    ResidualBlock<float> second(ResidualBlockSpec::make(16, 4, 1, Transform::basic));
    randomize_block(first, 13);
    randomize_block(second, 14);
    ForwardContext ctx;
    const auto y = second.forward(first.forward(testing::random_input<float>({2, 16, 4, 4}, 15), ctx), ctx);
    CHECK(y.shape() == Shape{2, 16, 4, 4});
  }
}
