#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "hwgen/checkpoint.hpp"
#include "hwgen/error.hpp"
#include "hwgen/nn.hpp"
#include "hwgen/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/layer_gradcheck.hpp"

using namespace hwgen;
using hwgen::testing::check_kind;
using hwgen::testing::gradcheck;
using hwgen::testing::project;
using hwgen::testing::random_away_from_zero;
using hwgen::testing::random_tensor;

TEST_CASE("identity and relu forward") {
  Var x = constant(Tensor::from({1, 2, 3}));
  CHECK(x.value() == Tensor::from({1, 2, 3}));
  CHECK(relu(constant(Tensor::from({-1, 0, 2}))).value() == Tensor::from({0, 0, 2}));
}

TEST_CASE("forward is deterministic for a fixed noise seed") {
  NoiseSource init(3);
  Tensor x = random_tensor({2, 3, 4}, init);
  Tensor s = random_tensor({2}, init);
  auto run = [&](std::uint64_t seed) {
    NoiseSource noise(seed);
    return blur2d(additive_noise(constant(x), constant(s), noise)).value();
  };
  CHECK(run(11) == run(11));
  CHECK_FALSE(run(11) == run(12));
}

TEST_CASE("every layer kind passes the finite-difference check") {
  NoiseSource rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    for (LayerKind kind : all_layer_kinds()) {
      CAPTURE(layer_kind_name(kind));
      CHECK(check_kind(kind, rng) < 1e-4);
    }
  }
}

TEST_CASE("linear chain gradients match finite differences") {
  NoiseSource rng(7);
  double err = gradcheck(
      {random_tensor({4}, rng), random_tensor({5, 4}, rng), random_tensor({5}, rng),
       random_tensor({3, 5}, rng), random_tensor({3}, rng)},
      [](std::span<const Var> v) { return project(linear(linear(v[0], v[1], v[2]), v[3], v[4])); });
  CHECK(err < 1e-4);
}

TEST_CASE("sum(W x) gradient equals x broadcast") {
  Parameter w{"toy/w", Tensor(Shape{2, 3}, {1, 2, 3, 4, 5, 6})};
  Var x = constant(Tensor::from({0.5, -1, 2}));
  Var loss = sum(linear(x, param(w), Var()));
  backward(loss);
  REQUIRE(w.grad.has_value());
  CHECK(*w.grad == Tensor(Shape{2, 3}, {0.5, -1, 2, 0.5, -1, 2}));
}

TEST_CASE("parameters a loss does not reach keep no gradient") {
  Parameter used{"toy/used", Tensor::from({1, 2})};
  Parameter unused{"toy/unused", Tensor::from({3, 4})};
  Var loss = sum(param(used));
  Var other = param(unused);
  (void)other;
  backward(loss);
  CHECK(used.grad.has_value());
  CHECK_FALSE(unused.grad.has_value());
}

TEST_CASE("backward errors") {
  CHECK_THROWS_AS(backward(Var()), Error);
  CHECK_THROWS_AS(backward(leaf(Tensor::from({1, 2}))), ShapeError);
}

TEST_CASE("repeated backward passes over one graph are independent") {
  Parameter p{"toy/p", Tensor::from({1, 2, 3})};
  Var y = mul(param(p), param(p));
  Var a = sum(y);
  Var b = scale(sum(y), 2);
  backward(a);
  Tensor ga = *p.grad;
  p.grad.reset();
  backward(b);
  Tensor gb = *p.grad;
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(gb[i] == doctest::Approx(2 * ga[i]));
}

TEST_CASE("adain normalizes each channel") {
  Var x = constant(Tensor(Shape{1, 4}, {1, 2, 3, 4}));
  SUBCASE("unit scale, zero shift") {
    Tensor y = adain(x, constant(Tensor::from({1})), constant(Tensor::from({0}))).value();
    double m = y.sum() / 4, var = 0;
    for (Real v : y.values()) var += (v - m) * (v - m);
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(std::sqrt(var / 4) - 1) < 1e-3);
  }
  SUBCASE("scale 2, shift 1 matches the instance-norm formula") {
    // (x - 2.5) / sqrt(1.25 + 1e-5) * 2 + 1
    Tensor y = adain(x, constant(Tensor::from({2})), constant(Tensor::from({1}))).value();
    const double expected[] = {-1.6833, 0.1056, 1.8944, 3.6833};
    for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-3));
  }
  SUBCASE("constant channel maps to the shift") {
    Var c = constant(Tensor(Shape{1, 5}, 3.0));
    Tensor y = adain(c, constant(Tensor::from({4})), constant(Tensor::from({-0.5}))).value();
    for (Real v : y.values()) CHECK(v == doctest::Approx(-0.5));
  }
  CHECK_THROWS_AS(adain(x, constant(Tensor::from({1, 1})), constant(Tensor::from({0}))), ShapeError);
}

TEST_CASE("adain statistics property") {
  NoiseSource rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 1 + trial % 4;
    Tensor x = random_tensor({c, 3, 7}, rng, 0.5 + trial % 3);
    Tensor sc = random_tensor({c}, rng, 2.0);
    Tensor sh = random_tensor({c}, rng, 2.0);
    Tensor y = adain(constant(x), constant(sc), constant(sh)).value();
    const int n = 21;
    for (int ci = 0; ci < c; ++ci) {
      double m = 0, var = 0;
      for (int i = 0; i < n; ++i) m += y[ci * n + i];
      m /= n;
      for (int i = 0; i < n; ++i) var += (y[ci * n + i] - m) * (y[ci * n + i] - m);
      CHECK(std::abs(m - sh[ci]) < 1e-3);
      CHECK(std::abs(std::sqrt(var / n) - std::abs(sc[ci])) < 1e-2);
    }
  }
}

TEST_CASE("nearest upsampling") {
  Var x = constant(Tensor(Shape{1, 1, 2}, {1, 2}));
  CHECK(upsample_nearest(x, 2, 1).value() == Tensor(Shape{1, 2, 2}, {1, 2, 1, 2}));
  CHECK(upsample_nearest(x, 1, 2).value() == Tensor(Shape{1, 1, 4}, {1, 1, 2, 2}));
  CHECK(upsample_nearest(constant(Tensor(Shape{3, 2, 5})), 2, 2).shape() == Shape{3, 4, 10});
  CHECK_THROWS_AS(upsample_nearest(x, 0, 1), ShapeError);
}

TEST_CASE("upsample then average-pool with equal factors is the identity") {
  NoiseSource rng(5);
  for (int v = 1; v <= 3; ++v) {
    for (int h = 1; h <= 3; ++h) {
      Tensor x = random_tensor({2, 3, 4}, rng);
      Tensor y = avg_pool2d(upsample_nearest(constant(x), v, h), v, h).value();
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("conv2d shape errors") {
  Var x = constant(Tensor(Shape{2, 4, 4}));
  CHECK_THROWS_AS(conv2d(x, constant(Tensor(Shape{1, 3, 3, 3})), Var()), ShapeError);
  CHECK_THROWS_AS(conv2d(x, constant(Tensor(Shape{1, 2, 5, 5})), Var()), ShapeError);
}

TEST_CASE("checkpoint round trip preserves ids, shapes and values") {
  NoiseSource rng(1);
  ParamSet ps("net");
  Conv2d::make(ps, "conv", 2, 3, 3, 3, rng);
  Linear::make(ps, "fc", 4, 2, rng);
  Checkpoint ck;
  ck.config["preset"] = "desk";
  append_params(ck, ps);
  auto path = std::filesystem::temp_directory_path() / "hwgen_test_ckpt.bin";
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.config.at("preset") == "desk");
  ParamSet fresh("net");
  NoiseSource other(2);
  Conv2d::make(fresh, "conv", 2, 3, 3, 3, other);
  Linear::make(fresh, "fc", 4, 2, other);
  restore_params(back, fresh);
  auto a = ps.all();
  auto b = fresh.all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);

  ParamSet wrong("net");
  Conv2d::make(wrong, "conv", 2, 4, 3, 3, other);
  CHECK_THROWS_AS(restore_params(back, wrong), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("adam moves parameters against the gradient") {
  Parameter p{"toy/p", Tensor::from({1.0, -1.0})};
  Adam opt({.lr = 0.1});
  opt.step(p, Tensor::from({2.0, -3.0}));
  CHECK(p.value[0] == doctest::Approx(0.9));
  CHECK(p.value[1] == doctest::Approx(-0.9));
}
