// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include <doctest.h>

#include <cstring>

#include "../support/oracles.hpp"
#include "../support/random_layers.hpp"
#include "seqconv/errors.hpp"
#include "seqconv/gradcheck.hpp"
#include "seqconv/seqconv.hpp"

using namespace seqconv;

namespace {

std::uint64_t shapes_total(const std::vector<ParamShape>& shapes) {
  std::uint64_t n = 0;
  for (const auto& s : shapes) n += oracle::Array::numel(s.shape);
  return n;
}

std::uint64_t kernel_total(const std::vector<ParamShape>& shapes) {
  std::uint64_t n = 0;
  for (const auto& s : shapes)
    if (s.shape.size() == 4) n += oracle::Array::numel(s.shape);
  return n;
}

SeqConvConfig basic(int g, int k, Aggregation a = Aggregation::dense, int window = 0) {
  SeqConvConfig c;
  c.groups = g;
  c.growth = k;
  c.aggregation = a;
  c.window = window;
  return c;
}

}  // namespace

TEST_SUITE("seqconv") {
  TEST_CASE("g = 1 reduces to one Conv-BN-ReLU of width k") {
    SeqConvLayer<float> layer(basic(1, 4), 6);
    testing::randomize(layer, 1);
    const auto x = testing::random_input<float>({2, 6, 5, 5}, 2);
    const auto y = layer.forward(x, Mode::train);
    CHECK(y.shape() == Shape{2, 4, 5, 5});
    const auto& u = layer.groups()[0].units()[0];
    const auto ref = oracle::relu(oracle::batch_norm_train(
        oracle::conv2d(oracle::from_tensor(x), oracle::from_tensor(u.conv().kernel()), 1, 1, 1),
        oracle::values(u.bn().gamma()), oracle::values(u.bn().beta())));
    CHECK(oracle::relative_error(oracle::values(y), ref.v) < 1e-5);
  }

  TEST_CASE("parameter counts from shape enumeration") {
    // g=2, k=4, C_in=8: kernels 8*4*9 and 12*4*9, BN 2*(2*4).
    CHECK(param_count(basic(2, 4), 8) == 8 * 4 * 9 + 12 * 4 * 9 + 2 * (2 * 4));
    CHECK(param_count(basic(2, 4), 8) == 736);
    // Windowed g'=2 on 8 = 2*4 input channels: same kernel cost as a regular 8->8 3x3 conv.
    const auto w = param_shapes(basic(2, 4, Aggregation::windowed, 2), 8);
    CHECK(kernel_total(w) == 576);
    CHECK(kernel_total(w) == 8 * 8 * 9);
    // The degenerate group count still sums correctly.
    CHECK(shapes_total(param_shapes(basic(2, 4), 8)) == param_count(basic(2, 4), 8));
  }

  TEST_CASE("group i of a dense layer reads C_in + (i-1) k channels") {
    const auto cfg = basic(3, 2);
    CHECK(group_view(cfg, 5, 3).count == 5 + 2 * 2);
    const auto shapes = param_shapes(cfg, 5);
    CHECK(shapes[6].role == "group3.conv3x3.kernel");
    CHECK(shapes[6].shape == Shape{2, 9, 3, 3});
    SeqConvLayer<float> layer(cfg, 5);
    CHECK(layer.groups()[2].in_width() == 9);
  }

  TEST_CASE("bottleneck shapes: 1x1 then subgrouped 3x3, each with BN") {
    SeqConvConfig c = basic(1, 4);
    c.transform = Transform::bottleneck;
    const auto s = param_shapes(c, 8);
    REQUIRE(s.size() == 6);
    CHECK(s[0].shape == Shape{4, 8, 1, 1});
    CHECK(s[1].shape == Shape{4});
    CHECK(s[2].shape == Shape{4});
    CHECK(s[3].shape == Shape{4, 4, 3, 3});
    CHECK(shapes_total(s) == 8 * 4 + 4 * 4 * 9 + 2 * 4 + 2 * 4);
    CHECK_THROWS_AS(param_shapes(basic(0, 4), 8), InvalidArgument);
  }

  TEST_CASE("window_mask examples") {
    // Two input groups (positions -1, 0).
    CHECK(window_mask(1, 2, 2) == std::vector<int>{1, 1});
    CHECK(window_mask(3, 2, 2) == std::vector<int>{0, 0, 1, 1});
    CHECK(window_mask(2, 3, 2) == std::vector<int>{1, 1, 1});
    CHECK(window_mask(4, 1, 1) == std::vector<int>{0, 0, 0, 1});
    CHECK_THROWS_AS(window_mask(0, 2, 2), InvalidArgument);
  }

  TEST_CASE("windowed input must decompose into k-wide groups") {
    try {
      SeqConvLayer<float> bad(basic(2, 4, Aggregation::windowed), 6);
      FAIL("accepted a 6-channel input with k=4");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("groups of k=4") != std::string::npos);
    }
  }

  TEST_CASE("every variant emits exactly g*k channels") {
    for (auto agg : {Aggregation::dense, Aggregation::windowed}) {
      for (auto tr : {Transform::basic, Transform::bottleneck}) {
        SeqConvConfig c = basic(3, 4, agg);
        c.transform = tr;
        c.subgroups = tr == Transform::bottleneck ? 2 : 1;
        SeqConvLayer<float> layer(c, 8);
        testing::randomize(layer, 3);
        CHECK(layer.forward(testing::random_input<float>({2, 8, 4, 4}, 4), Mode::train).dim(1) == 12);
      }
    }
  }

  TEST_CASE("windowed layer equals the masked dense formulation") {
    const testing::LayerCase cases[] = {{3, 4, 2, 2, Transform::basic, 1},
                                        {5, 2, 3, 2, Transform::basic, 1},
                                        {4, 4, 2, 1, Transform::bottleneck, 2},
                                        {2, 8, 1, 3, Transform::bottleneck, 1}};
    std::uint64_t seed = 100;
    for (const auto& c : cases) {
      const double err = testing::masked_dense_error(c, ++seed);
      INFO("g=", c.groups, " k=", c.growth, " m=", c.input_groups, " g'=", c.window);
      CHECK(err < 1e-6);
    }
  }

  TEST_CASE("a window covering the whole aggregate equals the dense layer bitwise") {
    for (auto tr : {Transform::basic, Transform::bottleneck}) {
      CHECK(testing::covering_window_bitwise_equal({4, 4, 2, 5, tr, 1}, 7));
      CHECK(testing::covering_window_bitwise_equal({3, 2, 1, 9, tr, 1}, 8));
    }
  }

  TEST_CASE("causality: group j's parameters never affect earlier groups") {
    SeqConvLayer<double> layer(basic(3, 2, Aggregation::windowed), 4);
    testing::randomize(layer, 9);
    const auto x = testing::random_input<double>({2, 4, 4, 4}, 10);
    layer.forward(x, Mode::train);
    const auto before = layer.last_group_outputs();
    for (auto& v : layer.groups()[1].units()[0].conv().kernel().values()) v += 0.5;
    layer.forward(x, Mode::train);
    const auto& after = layer.last_group_outputs();
    CHECK(std::memcmp(before[0].values().data(), after[0].values().data(), before[0].numel() * sizeof(double)) == 0);
    CHECK(std::memcmp(before[1].values().data(), after[1].values().data(), before[1].numel() * sizeof(double)) != 0);
  }

  TEST_CASE("windowed kernel cost equals a regular conv when C_in = g' k") {
    for (int g : {1, 2, 4, 8}) {
      for (int k : {2, 4, 8}) {
        for (int m : {1, 2, 3}) {
          const auto shapes = param_shapes(basic(g, k, Aggregation::windowed), static_cast<std::size_t>(m * k));
          CHECK(kernel_total(shapes) == static_cast<std::uint64_t>(m * k) * static_cast<std::uint64_t>(g * k) * 9);
        }
      }
    }
  }

  TEST_CASE("subgrouped 3x3") {
    const auto x = testing::random_input<double>({1, 8, 4, 4}, 11);
    const auto k1 = testing::random_input<double>({8, 8, 3, 3}, 12);
    CHECK(oracle::relative_error(oracle::values(subgrouped_3x3(x, k1, 1)),
                                 oracle::values(conv2d(x, k1, {1, 1, 1}))) == 0.0);
    // c = k: depthwise, channel o reads only input channel o.
    const auto kd = testing::random_input<double>({8, 1, 3, 3}, 13);
    const auto yd = subgrouped_3x3(x, kd, 8);
    auto x2 = x.clone();
    for (std::size_t i = 0; i < 16; ++i) x2[3 * 16 + i] += 1.0;
    const auto yd2 = subgrouped_3x3(x2, kd, 8);
    for (std::size_t c = 0; c < 8; ++c) {
      bool same = true;
      for (std::size_t i = 0; i < 16; ++i) same &= yd[c * 16 + i] == yd2[c * 16 + i];
      CHECK(same == (c != 3));
    }
    CHECK_THROWS_AS(subgrouped_3x3(x, kd, 3), InvalidArgument);
    SeqConvConfig c = basic(1, 32);
    c.transform = Transform::bottleneck;
    c.subgroups = 8;
    const auto s = param_shapes(c, 32);
    CHECK(oracle::Array::numel(s[3].shape) == 32 * (32 / 8) * 9);
    CHECK(oracle::Array::numel(s[3].shape) == 1152);
    c.subgroups = 5;
    CHECK_THROWS_AS(param_shapes(c, 32), InvalidArgument);
  }

  TEST_CASE("full-layer gradient check, dense and windowed, basic and bottleneck") {
    for (auto agg : {Aggregation::dense, Aggregation::windowed}) {
      for (auto tr : {Transform::basic, Transform::bottleneck}) {
        SeqConvConfig c = basic(3, 2, agg);
        c.transform = tr;
        SeqConvLayer<double> layer(c, 4);
        testing::randomize(layer, 20);
        auto x = testing::random_input<double>({3, 4, 4, 4}, 21);
        x.set_requires_grad(true);
        const auto w = testing::random_input<double>({3, 6, 4, 4}, 22);
        std::vector<NamedParam<double>> named;
        layer.collect("layer", named);
        std::vector<Tensor<double>> params{x};
        for (const auto& p : named) params.push_back(p.tensor);
        const auto rep = grad_check([&] { return sum(mul(layer.forward(x, Mode::train), w)); }, params);
        INFO(to_string(agg), " ", to_string(tr), " max rel err ", rep.max_rel_err, " skipped ", rep.kinks_skipped);
        CHECK(rep.pass);
        CHECK(rep.max_rel_err < 1e-4);
      }
    }
  }
}
