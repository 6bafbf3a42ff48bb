// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "../support/oracles.hpp"
#include "../support/primitive_checks.hpp"
#include "seqconv/errors.hpp"
#include "seqconv/gradcheck.hpp"
#include "seqconv/ops.hpp"

using namespace seqconv;

namespace {

Tensor<double> seeded(Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor<double> t(std::move(shape), 0.0, grad);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

bool bitwise_equal(const Tensor<double>& a, const Tensor<double>& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("tensor-core") {
  TEST_CASE("tensor shape invariants") {
    Tensor<float> t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.grad().empty());
    t.set_requires_grad(true);
    CHECK(t.grad().size() == t.numel());
    CHECK_THROWS_AS(Tensor<float>(Shape{2, 0}), InvalidArgument);
    CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), InvalidArgument);
  }

  TEST_CASE("conv2d: all-ones 3x3 centre sums to 9") {
    Tensor<double> x({1, 1, 3, 3}, 1.0), k({1, 1, 3, 3}, 1.0);
    const auto y = conv2d(x, k, {1, 1, 1});
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    CHECK(y[4] == 9.0);
    CHECK(y[0] == 4.0);  // zero padding at the corner
  }

  TEST_CASE("conv2d: grouped channels are independent") {
    auto x = seeded({1, 2, 4, 4}, 1), k = seeded({2, 1, 3, 3}, 2);
    const auto y0 = conv2d(x, k, {1, 1, 2});
    auto x2 = x.clone();
    for (std::size_t i = 16; i < 32; ++i) x2[i] += 1.0;  // channel 1 only
    const auto y1 = conv2d(x2, k, {1, 1, 2});
    for (std::size_t i = 0; i < 16; ++i) CHECK(y0[i] == y1[i]);
    bool changed = false;
    for (std::size_t i = 16; i < 32; ++i) changed |= y0[i] != y1[i];
    CHECK(changed);
  }

  TEST_CASE("conv2d: MAC count matches an explicit multiply counter") {
    const Shape xs{1, 8, 4, 4}, ks{8, 8, 3, 3};
    std::uint64_t counted = 0;
    oracle::conv2d(oracle::Array(xs), oracle::Array(ks), 1, 1, 1, &counted);
    CHECK(counted == 9216);
    CHECK(conv2d_macs(xs, ks, {1, 1, 1}) == counted);
    std::uint64_t strided = 0;
    oracle::conv2d(oracle::Array({1, 8, 8, 8}), oracle::Array({16, 4, 3, 3}), 2, 1, 2, &strided);
    CHECK(conv2d_macs({1, 8, 8, 8}, {16, 4, 3, 3}, {2, 1, 2}) == strided);
  }

  TEST_CASE("conv2d: matches direct convolution for strides, padding and groups") {
    struct Case {
      Shape x, k;
      Conv2dGeometry geo;
    };
    const Case cases[] = {{{2, 4, 5, 5}, {6, 4, 3, 3}, {1, 1, 1}},
                          {{2, 4, 7, 6}, {4, 2, 3, 3}, {2, 1, 2}},
                          {{1, 6, 5, 5}, {6, 1, 3, 3}, {1, 0, 6}},
                          {{3, 8, 4, 4}, {4, 8, 1, 1}, {1, 0, 1}}};
    std::uint64_t seed = 10;
    for (const auto& c : cases) {
      const auto x = seeded(c.x, ++seed), k = seeded(c.k, ++seed);
      const auto y = conv2d(x, k, c.geo);
      const auto ref = oracle::conv2d(oracle::from_tensor(x), oracle::from_tensor(k), c.geo.stride, c.geo.padding,
                                      c.geo.groups);
      REQUIRE(y.shape() == ref.shape);
      CHECK(oracle::relative_error(oracle::values(y), ref.v) < 1e-12);
    }
  }

  TEST_CASE("conv2d: output extent uses floor arithmetic") {
    CHECK(conv2d_output_shape({1, 4, 33, 33}, {4, 4, 3, 3}, {2, 1, 1}) == Shape{1, 4, 17, 17});
    CHECK(conv2d_output_shape({1, 4, 8, 8}, {4, 4, 3, 3}, {2, 1, 1}) == Shape{1, 4, 4, 4});
  }

  TEST_CASE("conv2d: shape violations name the dimension") {
    auto message = [](auto fn) {
      try {
        fn();
      } catch (const InvalidArgument& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    const auto bad_groups = message([] { conv2d_output_shape({1, 5, 4, 4}, {4, 5, 3, 3}, {1, 1, 2}); });
    CHECK(bad_groups.find("input channels (C=") != std::string::npos);
    const auto bad_out = message([] { conv2d_output_shape({1, 4, 4, 4}, {3, 2, 3, 3}, {1, 1, 2}); });
    CHECK(bad_out.find("output channels (O=") != std::string::npos);
    const auto bad_in = message([] { conv2d_output_shape({1, 4, 4, 4}, {4, 3, 3, 3}, {1, 1, 1}); });
    CHECK(bad_in.find("kernel I extent") != std::string::npos);
  }

  TEST_CASE("conv2d: a grouped conv equals per-group ungrouped convs bitwise") {
    const auto x = seeded({2, 6, 5, 5}, 30), k = seeded({4, 3, 3, 3}, 31);
    const auto y = conv2d(x, k, {1, 1, 2});
    for (std::size_t g = 0; g < 2; ++g) {
      const auto xg = slice_channels(x, 3 * g, 3);
      Tensor<double> kg({2, 3, 3, 3});
      std::copy_n(k.values().begin() + static_cast<long>(g * 54), 54, kg.values().begin());
      const auto yg = conv2d(xg, kg, {1, 1, 1});
      CHECK(bitwise_equal(slice_channels(y, 2 * g, 2), yg));
    }
  }

  TEST_CASE("batch_norm: examples") {
    Tensor<double> g({2}, 1.0), b({2}, 0.0);
    SUBCASE("zero input stays zero") {
      BatchNormStats<double> st(2);
      const auto y = batch_norm(Tensor<double>({3, 2, 2, 2}, 0.0), g, b, st, Mode::train);
      for (double v : y.values()) CHECK(v == 0.0);
    }
    SUBCASE("values {1, 3} normalize to {-1, +1}") {
      Tensor<double> x({2, 1, 1, 1}, std::vector<double>{1.0, 3.0});
      BatchNormStats<double> st(1);
      const auto y = batch_norm(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), st, Mode::train, {1e-12, 0.9});
      CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-9));
      CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("random input has zero mean and unit variance per channel") {
      const auto x = seeded({2, 4, 3, 3}, 40);
      Tensor<double> g4({4}, 1.0), b4({4}, 0.0);
      BatchNormStats<double> st(4);
      const auto y = oracle::from_tensor(batch_norm(x, g4, b4, st, Mode::train));
      for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t n = 0; n < 2; ++n)
          for (std::size_t i = 0; i < 9; ++i) mean += y.v[(n * 4 + c) * 9 + i];
        mean /= 18.0;
        for (std::size_t n = 0; n < 2; ++n)
          for (std::size_t i = 0; i < 9; ++i) var += std::pow(y.v[(n * 4 + c) * 9 + i] - mean, 2);
        var /= 18.0;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
      }
    }
    SUBCASE("eval mode before any train step is an invalid state") {
      BatchNormStats<double> st(2);
      CHECK_THROWS_AS(batch_norm(Tensor<double>({2, 2, 1, 1}), g, b, st, Mode::eval), InvalidState);
    }
    SUBCASE("running statistics use momentum 0.9 and the biased variance") {
      Tensor<double> x({2, 1, 1, 1}, std::vector<double>{1.0, 3.0});
      BatchNormStats<double> st(1);
      batch_norm(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), st, Mode::train);
      CHECK(st.populated);
      CHECK(st.mean[0] == doctest::Approx(0.1 * 2.0));
      CHECK(st.var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0));
      const auto y = batch_norm(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), st, Mode::eval);
      CHECK(y[0] == doctest::Approx((1.0 - 0.2) / std::sqrt(1.0 + 1e-5)));
    }
    SUBCASE("matches the direct computation with affine parameters") {
      const auto x = seeded({3, 3, 2, 2}, 41);
      const auto ga = seeded({3}, 42), be = seeded({3}, 43);
      BatchNormStats<double> st(3);
      const auto y = batch_norm(x, ga, be, st, Mode::train);
      const auto ref = oracle::batch_norm_train(oracle::from_tensor(x), oracle::values(ga), oracle::values(be));
      CHECK(oracle::relative_error(oracle::values(y), ref.v) < 1e-12);
    }
  }

  TEST_CASE("relu: examples") {
    Tape<double> tape;
    TapeGuard<double> guard(tape);
    Tensor<double> x({3}, std::vector<double>{-1.0, 0.0, 2.0}, true);
    const auto y = relu(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
    tape.backward(sum(y));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);  // subgradient 0 at the kink
    CHECK(x.grad()[2] == 1.0);

    Tape<double> t2;
    TapeGuard<double> g2(t2);
    Tensor<double> neg({4}, -0.5, true);
    const auto z = relu(neg);
    t2.backward(sum(z));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(z[i] == 0.0);
      CHECK(neg.grad()[i] == 0.0);
    }
  }

  TEST_CASE("relu: NaN is not masked") {
    const Tensor<float> x({2}, std::vector<float>{std::nanf(""), -1.0f});
    const auto y = relu(x);
    CHECK(std::isnan(y[0]));
    CHECK(y[1] == 0.0f);
  }

  TEST_CASE("concat_channels: examples") {
    const auto a = seeded({2, 4, 2, 2}, 50), b = seeded({2, 4, 2, 2}, 51);
    const std::vector<Tensor<double>> two{a, b};
    const auto y = concat_channels<double>(two);
    CHECK(y.shape() == Shape{2, 8, 2, 2});
    CHECK(bitwise_equal(slice_channels(y, 0, 4), a));
    CHECK(bitwise_equal(slice_channels(y, 4, 4), b));
    const std::vector<Tensor<double>> one{a};
    CHECK(bitwise_equal(concat_channels<double>(one), a));
    const std::vector<Tensor<double>> bad{a, seeded({2, 4, 3, 2}, 52)};
    CHECK_THROWS_AS(concat_channels<double>(bad), InvalidArgument);
  }

  TEST_CASE("concat_channels and slice_channels route values and gradients exactly") {
    Tape<double> tape;
    TapeGuard<double> guard(tape);
    auto a = seeded({2, 8, 2, 2}, 53, true), b = seeded({2, 8, 2, 2}, 54, true), c = seeded({2, 8, 2, 2}, 55, true);
    const std::vector<Tensor<double>> parts{a, b, c};
    const auto y = concat_channels<double>(parts);
    const auto w = checks::fixed_weights(y.shape(), 56);
    tape.backward(sum(mul(y, w)));
    const std::vector<Tensor<double>*> ps{&a, &b, &c};
    for (std::size_t p = 0; p < 3; ++p) {
      CHECK(bitwise_equal(slice_channels(y, 8 * p, 8), *ps[p]));
      const auto wp = slice_channels(w, 8 * p, 8);
      for (std::size_t i = 0; i < wp.numel(); ++i) CHECK(ps[p]->grad()[i] == wp[i]);
    }
  }

  TEST_CASE("global_avg_pool: examples") {
    CHECK(global_avg_pool(Tensor<double>({1, 1, 3, 3}, 3.0))[0] == 3.0);
    CHECK(global_avg_pool(Tensor<double>({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}))[0] == 2.5);
    const auto x = seeded({3, 5, 4, 3}, 60);
    const auto y = global_avg_pool(x);
    CHECK(y.shape() == Shape{3, 5});
    for (std::size_t nc = 0; nc < 15; ++nc) {
      double s = 0.0;
      for (std::size_t i = 0; i < 12; ++i) s += x[nc * 12 + i];
      CHECK(std::abs(y[nc] - s / 12.0) < 1e-12);
    }
  }

  TEST_CASE("linear: examples") {
    const auto x = seeded({2, 3}, 70);
    Tensor<double> eye({3, 3}, 0.0);
    eye[0] = eye[4] = eye[8] = 1.0;
    CHECK(bitwise_equal(linear(x, eye, Tensor<double>({3}, 0.0)), x));
    const auto bias = seeded({4}, 71);
    const auto zb = linear(x, Tensor<double>({3, 4}, 0.0), bias);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t k = 0; k < 4; ++k) CHECK(zb[n * 4 + k] == bias[k]);
    const auto w = seeded({3, 4}, 72), zero = Tensor<double>({4}, 0.0);
    const auto y = linear(x, w, zero);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t k = 0; k < 4; ++k) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) s += x[n * 3 + c] * w[c * 4 + k];
        CHECK(std::abs(y[n * 4 + k] - s) < 1e-12);
      }
    CHECK_THROWS_AS(linear(x, seeded({4, 4}, 73), zero), InvalidArgument);
  }

  TEST_CASE("softmax_cross_entropy: examples") {
    const std::vector<int> labels{0, 3};
    CHECK(softmax_cross_entropy(Tensor<double>({2, 10}, 0.5), std::span<const int>(labels)).item() ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));
    Tensor<double> sure({1, 10}, 0.0);
    sure[7] = 1000.0;
    const std::vector<int> seven{7};
    const double l = softmax_cross_entropy(sure, std::span<const int>(seven)).item();
    CHECK(l >= 0.0);
    CHECK(l < 1e-12);
    const std::vector<int> bad{10};
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor<double>({1, 10}), std::span<const int>(bad)), InvalidArgument);

    GradCheckOptions tight;
    tight.tol = 1e-6;
    const std::vector<int> four{1, 9, 0, 4};
    const auto rep = grad_check(
        [&](const Tensor<double>& z) { return softmax_cross_entropy(z, std::span<const int>(four)); },
        seeded({4, 10}, 80, true), tight);
    CHECK(rep.pass);
    CHECK(rep.max_rel_err < 1e-6);
    for (std::uint64_t s = 0; s < 20; ++s) {
      CHECK(softmax_cross_entropy(seeded({4, 10}, 100 + s), std::span<const int>(four)).item() >= 0.0);
    }
  }

  TEST_CASE("dropout: examples") {
    Rng rng(5);
    const auto x = seeded({4, 3, 2, 2}, 90);
    CHECK(bitwise_equal(dropout(x, 0.0, Mode::train, rng), x));
    CHECK(bitwise_equal(dropout(x, 0.5, Mode::eval, rng), x));
    CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, rng), InvalidArgument);
    CHECK_THROWS_AS(dropout(x, -0.1, Mode::train, rng), InvalidArgument);

    const Tensor<double> ones({1000000}, 1.0);
    const auto y = dropout(ones, 0.1, Mode::train, rng);
    std::size_t survivors = 0;
    for (double v : y.values()) {
      if (v != 0.0) {
        ++survivors;
        CHECK_MESSAGE(v == doctest::Approx(1.0 / 0.9), "survivors are scaled by 1/(1-rate)");
        if (v != doctest::Approx(1.0 / 0.9)) break;
      }
    }
    CHECK(std::abs(static_cast<double>(survivors) / 1e6 - 0.9) < 0.002);
  }

  TEST_CASE("backward: examples") {
    SUBCASE("sum(x) gives ones") {
      Tape<double> tape;
      TapeGuard<double> guard(tape);
      Tensor<double> x({5}, 2.0, true);
      tape.backward(sum(x));
      for (double g : x.grad()) CHECK(g == 1.0);
    }
    SUBCASE("sum(x*x) at 3 gives 6") {
      Tape<double> tape;
      TapeGuard<double> guard(tape);
      Tensor<double> x({3}, 3.0, true);
      tape.backward(sum(mul(x, x)));
      for (double g : x.grad()) CHECK(g == 6.0);
    }
    SUBCASE("gradients accumulate over multiple consumers") {
      Tape<double> tape;
      TapeGuard<double> guard(tape);
      Tensor<double> x({2}, 1.5, true);
      tape.backward(sum(add(add(x, x), mul(x, x))));
      for (double g : x.grad()) CHECK(g == 2.0 + 3.0);
    }
    SUBCASE("unreachable tensors hold zero") {
      Tape<double> tape;
      TapeGuard<double> guard(tape);
      Tensor<double> x({2}, 1.0, true), unused({2}, 1.0, true);
      unused.grad()[0] = 42.0;
      (void)mul(unused, unused);
      tape.backward(sum(x));
      CHECK(unused.grad()[0] == 0.0);
      CHECK(unused.grad()[1] == 0.0);
    }
    SUBCASE("each recorded op is replayed exactly once") {
      Tape<double> tape;
      TapeGuard<double> guard(tape);
      Tensor<double> x({2}, 1.0, true);
      const auto y = mul(x, x);
      const auto z = add(y, x);
      const auto l = sum(z);
      CHECK(tape.size() == 3);
      tape.backward(l);
      for (double g : x.grad()) CHECK(g == 3.0);
      tape.backward(l);  // replaying again recomputes, it does not double count
      for (double g : x.grad()) CHECK(g == 3.0);
    }
    SUBCASE("a tensor that is not on the tape is an invalid state") {
      Tape<double> tape;
      TapeGuard<double> guard(tape);
      Tensor<double> loose({1}, 1.0, true);
      CHECK_THROWS_AS(tape.backward(loose), InvalidState);
      CHECK_THROWS_AS(backward(Tensor<double>({1}, 1.0)), InvalidState);
    }
  }

  TEST_CASE("grad_check: examples") {
    const auto lin = grad_check([](const Tensor<double>& x) { return sum(mul(x, checks::fixed_weights({6}, 3))); },
                                seeded({6}, 110, true));
    CHECK(lin.pass);
    CHECK(lin.max_rel_err < 1e-10);

    GradCheckOptions tight;
    tight.tol = 1e-6;
    std::mt19937_64 rng(111);
    const auto r = grad_check([](const Tensor<double>& x) { return sum(relu(x)); }, checks::off_zero({10}, rng), tight);
    CHECK(r.pass);

    const auto bad = grad_check(
        [](const Tensor<double>& x) {
          Tensor<double> w({3}, std::vector<double>{1.0, std::nan(""), 1.0});
          return sum(mul(x, w));
        },
        seeded({3}, 112, true));
    CHECK_FALSE(bad.pass);
    CHECK(bad.failure.find("coordinate") != std::string::npos);

    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));  // floor 1e-6
  }

  TEST_CASE("every primitive op matches central differences at three random points") {
    const auto results = checks::check_primitives(3, 2026);
    CHECK(results.size() == 3 * 11);
    for (const auto& r : results) {
      INFO(r.op, " point ", r.point, " max rel err ", r.report.max_rel_err, " ", r.report.failure);
      CHECK(r.report.pass);
      CHECK(r.report.max_rel_err < 1e-4);
      CHECK(r.report.coords_checked > 0);
    }
  }

  TEST_CASE("forward passes are bitwise deterministic") {
    const auto x = seeded({2, 4, 6, 6}, 120), k = seeded({8, 4, 3, 3}, 121);
    Tensor<double> g({8}, 1.0), b({8}, 0.0);
    auto run = [&] {
      BatchNormStats<double> st(8);
      return relu(batch_norm(conv2d(x, k, {1, 1, 1}), g, b, st, Mode::train));
    };
    CHECK(bitwise_equal(run(), run()));
  }
}
