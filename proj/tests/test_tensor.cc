// tests/test_tensor.cc
//
// Copyright (c)  2026  ctxasr authors

#include <cmath>
#include <vector>

#include "ctxasr/adam.h"
#include "ctxasr/nn.h"
#include "ctxasr/tensor.h"
#include "doctest.h"
#include "testutil.h"

using namespace ctxasr;

TEST_CASE("matmul identity and zeros") {
  auto a = Tensor<double>::from_data({2, 2}, {1, 2, 3, 4});
  auto id = Tensor<double>::from_data({2, 2}, {1, 0, 0, 1});
  auto c = matmul(a, id);
  CHECK(c.data() == a.data());

  auto z = Tensor<double>::zeros({2, 3});
  auto cz = matmul(a, z);
  for (double v : cz.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul random vs naive oracle") {
  Rng rng(7);
  auto a = Tensor<double>::randn({3, 4}, rng, 1.0);
  auto b = Tensor<double>::randn({4, 2}, rng, 1.0);
  auto c = matmul(a, b);
  auto ref = test::NaiveMatMul(a.data(), b.data(), 3, 4, 2);
  REQUIRE(c.data().size() == ref.size());
  for (size_t i = 0; i < ref.size(); ++i) CHECK(c.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("matmul shape mismatch throws") {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({2, 3});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("softmax uniform and shift invariance") {
  auto x = Tensor<double>::from_data({1, 4}, {2.5, 2.5, 2.5, 2.5});
  auto y = softmax(x, 1);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  auto a = Tensor<double>::from_data({1, 3}, {0.3, -1.2, 2.0});
  auto b = Tensor<double>::from_data({1, 3}, {100.3, 98.8, 102.0});
  auto ya = softmax(a, 1);
  auto yb = softmax(b, 1);
  for (size_t i = 0; i < 3; ++i) CHECK(ya.data()[i] == doctest::Approx(yb.data()[i]).epsilon(1e-10));

  // direct two-element value check: softmax([0, ln 2]) = [1/3, 2/3]
  auto t = softmax(Tensor<double>::from_data({1, 2}, {0.0, std::log(2.0)}), 1);
  CHECK(t.data()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(t.data()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one for random inputs") {
  Rng rng(11);
  auto x = Tensor<double>::randn({5, 7}, rng, 3.0);
  auto y = softmax(x, 1);
  for (int64_t i = 0; i < 5; ++i) {
    double s = 0;
    for (int64_t j = 0; j < 7; ++j) s += y.at(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("log_softmax agrees with log of softmax") {
  Rng rng(12);
  auto x = Tensor<double>::randn({4, 6}, rng, 2.0);
  auto ls = log_softmax(x, 1);
  auto sm = softmax(x, 1);
  for (size_t i = 0; i < ls.data().size(); ++i) {
    CHECK(ls.data()[i] == doctest::Approx(std::log(sm.data()[i])).epsilon(1e-10));
  }
}

TEST_CASE("log_softmax axis 0") {
  auto x = Tensor<double>::from_data({2, 2}, {0.0, 1.0, 0.0, 3.0});
  auto ls = log_softmax(x, 0);
  CHECK(std::exp(ls.at(0, 0)) + std::exp(ls.at(1, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::exp(ls.at(0, 1)) + std::exp(ls.at(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("LogSumExp basics") {
  const double one[1] = {1.5};
  CHECK(LogSumExp(std::span<const double>(one, 1)) == doctest::Approx(1.5));
  const double two[2] = {0.0, 0.0};
  CHECK(LogSumExp(std::span<const double>(two, 2)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(LogSumExp2(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // stability under large shifts
  const double big[2] = {1000.0, 1000.0};
  CHECK(LogSumExp(std::span<const double>(big, 2)) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
  std::vector<double> empty;
  CHECK_THROWS_AS(LogSumExp(std::span<const double>(empty.data(), 0)), ContractError);
}

TEST_CASE("layer_norm constant row maps to bias") {
  auto x = Tensor<double>::from_data({1, 4}, {5.0, 5.0, 5.0, 5.0});
  auto g = Tensor<double>::full({4}, 1.0);
  auto b = Tensor<double>::from_data({4}, {0.5, -0.5, 1.0, 2.0});
  auto y = layer_norm(x, g, b, 1e-5);
  for (int64_t j = 0; j < 4; ++j) CHECK(y.at(0, j) == doctest::Approx(b.data()[static_cast<size_t>(j)]).epsilon(1e-9));
}

TEST_CASE("layer_norm normalizes to zero mean unit variance") {
  Rng rng(5);
  auto x = Tensor<double>::randn({3, 8}, rng, 4.0);
  auto g = Tensor<double>::full({8}, 1.0);
  auto b = Tensor<double>::zeros({8});
  auto y = layer_norm(x, g, b, 1e-10);
  for (int64_t i = 0; i < 3; ++i) {
    double mu = 0, var = 0;
    for (int64_t j = 0; j < 8; ++j) mu += y.at(i, j);
    mu /= 8;
    for (int64_t j = 0; j < 8; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
    var /= 8;
    CHECK(mu == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("backward of sum gives ones") {
  auto x = Tensor<double>::from_data({2, 2}, {1, 2, 3, 4});
  x.set_requires_grad(true);
  auto s = sum_all(x);
  backward(s);
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward through dot product") {
  // loss = sum(w * x); dloss/dw = x
  auto w = Tensor<double>::from_data({1, 3}, {0.5, -1.0, 2.0});
  auto x = Tensor<double>::from_data({1, 3}, {3.0, 4.0, 5.0});
  w.set_requires_grad(true);
  auto loss = sum_all(mul(w, x));
  backward(loss);
  CHECK(w.grad()[0] == doctest::Approx(3.0));
  CHECK(w.grad()[1] == doctest::Approx(4.0));
  CHECK(w.grad()[2] == doctest::Approx(5.0));
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  auto w = Tensor<double>::from_data({1, 1}, {2.0});
  w.set_requires_grad(true);
  auto y = mul(w, w);  // w^2, dw = 2w = 4
  backward(sum_all(y));
  CHECK(w.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("finite differences validate every op") {
  Rng rng(42);

  SUBCASE("matmul + add_bias + relu") {
    auto w = Tensor<double>::randn({4, 3}, rng, 1.0);
    auto b = Tensor<double>::randn({3}, rng, 1.0);
    auto x = Tensor<double>::randn({2, 4}, rng, 1.0);
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    x.set_requires_grad(true);
    auto res = test::CheckGradients({w, b, x}, [&] { return sum_all(relu(add_bias(matmul(x, w), b))); });
    CHECK_MESSAGE(res.ok, res.detail);
  }

  SUBCASE("softmax weighted") {
    auto x = Tensor<double>::randn({3, 5}, rng, 1.0);
    auto c = Tensor<double>::randn({3, 5}, rng, 1.0);
    x.set_requires_grad(true);
    auto res = test::CheckGradients({x}, [&] { return sum_all(mul(softmax(x, 1), c)); });
    CHECK_MESSAGE(res.ok, res.detail);
  }

  SUBCASE("log_softmax weighted") {
    auto x = Tensor<double>::randn({3, 5}, rng, 1.0);
    auto c = Tensor<double>::randn({3, 5}, rng, 1.0);
    x.set_requires_grad(true);
    auto res = test::CheckGradients({x}, [&] { return sum_all(mul(log_softmax(x, 1), c)); });
    CHECK_MESSAGE(res.ok, res.detail);
  }

  SUBCASE("layer_norm") {
    auto x = Tensor<double>::randn({3, 6}, rng, 2.0);
    auto g = Tensor<double>::randn({6}, rng, 1.0);
    auto b = Tensor<double>::randn({6}, rng, 1.0);
    auto c = Tensor<double>::randn({3, 6}, rng, 1.0);
    x.set_requires_grad(true);
    g.set_requires_grad(true);
    b.set_requires_grad(true);
    auto res = test::CheckGradients({x, g, b}, [&] { return sum_all(mul(layer_norm(x, g, b, 1e-5), c)); });
    CHECK_MESSAGE(res.ok, res.detail);
  }

  SUBCASE("tanh transpose concat slice") {
    auto a = Tensor<double>::randn({2, 3}, rng, 1.0);
    auto b = Tensor<double>::randn({2, 3}, rng, 1.0);
    auto c = Tensor<double>::randn({2, 6}, rng, 1.0);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto res = test::CheckGradients({a, b}, [&] {
      auto cat = concat(tanh_op(a), b, 1);
      auto sl = slice_cols(mul(cat, c), 1, 4);
      return sum_all(matmul(sl, transpose(sl)));
    });
    CHECK_MESSAGE(res.ok, res.detail);
  }

  SUBCASE("gather_rows with repeated indices") {
    auto table = Tensor<double>::randn({5, 3}, rng, 1.0);
    auto c = Tensor<double>::randn({4, 3}, rng, 1.0);
    table.set_requires_grad(true);
    auto res = test::CheckGradients({table}, [&] {
      return sum_all(mul(gather_rows(table, {2, 0, 2, 4}), c));
    });
    CHECK_MESSAGE(res.ok, res.detail);
  }

  SUBCASE("outer_add and pair_average_rows") {
    auto a = Tensor<double>::randn({3, 4}, rng, 1.0);
    auto b = Tensor<double>::randn({2, 4}, rng, 1.0);
    auto c = Tensor<double>::randn({6, 4}, rng, 1.0);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto res = test::CheckGradients({a, b}, [&] {
      return sum_all(mul(outer_add(a, b), c));
    });
    CHECK_MESSAGE(res.ok, res.detail);

    auto x = Tensor<double>::randn({5, 3}, rng, 1.0);
    auto cc = Tensor<double>::randn({3, 3}, rng, 1.0);
    x.set_requires_grad(true);
    auto res2 = test::CheckGradients({x}, [&] { return sum_all(mul(pair_average_rows(x), cc)); });
    CHECK_MESSAGE(res2.ok, res2.detail);
  }

  SUBCASE("nll_mean") {
    auto x = Tensor<double>::randn({4, 5}, rng, 1.0);
    x.set_requires_grad(true);
    auto res = test::CheckGradients({x}, [&] { return nll_mean(log_softmax(x, 1), {1, 0, 4, 2}); });
    CHECK_MESSAGE(res.ok, res.detail);
  }
}

TEST_CASE("NoGradGuard suppresses graph recording") {
  auto w = Tensor<double>::from_data({1, 1}, {2.0});
  w.set_requires_grad(true);
  Tensor<double> y;
  {
    NoGradGuard ng;
    y = mul(w, w);
  }
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  auto w = Tensor<float>::from_data({2}, {1.0f, -2.0f});
  w.set_requires_grad(true);
  Adam<float> opt({w}, {});
  opt.step();  // no gradient recorded
  CHECK(w.data()[0] == 1.0f);
  CHECK(w.data()[1] == -2.0f);
}

TEST_CASE("adam first step matches closed form") {
  // With bias correction the first update is -lr * g / (|g| + eps).
  auto w = Tensor<double>::from_data({1}, {0.7});
  w.set_requires_grad(true);
  AdamConfig<double> cfg;
  cfg.lr = 0.01;
  Adam<double> opt({w}, cfg);
  w.grad()[0] = 3.0;
  opt.step();
  CHECK(w.data()[0] == doctest::Approx(0.7 - 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam matches independent scalar recurrence on (w-3)^2") {
  // Oracle: the same recurrence written out longhand.
  double w = 0.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * (w - 3.0);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  REQUIRE(std::abs(w - 3.0) < 0.5);  // frozen expectation for the oracle itself

  auto p = Tensor<double>::from_data({1}, {0.0});
  p.set_requires_grad(true);
  AdamConfig<double> cfg;
  cfg.lr = 0.1;
  Adam<double> opt({p}, cfg);
  for (int t = 0; t < 100; ++t) {
    auto c = Tensor<double>::from_data({1}, {-3.0});
    auto diff = add(p, c);
    backward(sum_all(mul(diff, diff)));
    opt.step();
  }
  CHECK(p.data()[0] == doctest::Approx(w).epsilon(1e-9));
  CHECK(std::abs(p.data()[0] - 3.0) < 0.5);
}

TEST_CASE("clip_grad_norm rescales to the cap") {
  auto w = Tensor<double>::from_data({2}, {0.0, 0.0});
  w.set_requires_grad(true);
  Adam<double> opt({w}, {});
  w.grad()[0] = 3.0;
  w.grad()[1] = 4.0;
  const double norm = opt.clip_grad_norm(1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(std::hypot(w.grad()[0], w.grad()[1]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward and backward are bit deterministic") {
  auto run = [] {
    Rng rng(99);
    auto a = Tensor<float>::randn({4, 4}, rng, 1.0f);
    auto b = Tensor<float>::randn({4, 4}, rng, 1.0f);
    a.set_requires_grad(true);
    auto y = sum_all(tanh_op(matmul(a, b)));
    backward(y);
    auto out = a.grad();
    out.push_back(y.item());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("mha padded rows get exactly zero attention weight") {
  Rng rng(3);
  ParamStore<double> store;
  auto mha = MakeMha(store, "attn", 4, 4, 4, 4, 2, rng);
  auto q = Tensor<double>::randn({3, 4}, rng, 1.0);
  auto kv = Tensor<double>::randn({2, 4}, rng, 1.0);

  auto base = ApplyMha(q, kv, mha);

  // append a garbage row but mark it invalid
  auto pad = Tensor<double>::randn({1, 4}, rng, 5.0);
  auto kv_padded = concat(kv, pad, 0);
  std::vector<uint8_t> valid = {1, 1, 0};
  auto padded = ApplyMha(q, kv_padded, mha, &valid);

  REQUIRE(base.data().size() == padded.data().size());
  for (size_t i = 0; i < base.data().size(); ++i) {
    CHECK(std::abs(base.data()[i] - padded.data()[i]) < 1e-12);
  }
}

TEST_CASE("mha gradient check") {
  Rng rng(21);
  ParamStore<double> store;
  auto mha = MakeMha(store, "attn", 6, 4, 6, 6, 2, rng);
  auto q = Tensor<double>::randn({3, 6}, rng, 1.0);
  auto kv = Tensor<double>::randn({4, 4}, rng, 1.0);
  q.set_requires_grad(true);
  kv.set_requires_grad(true);
  auto params = store.all();
  params.push_back(q);
  params.push_back(kv);
  auto res = test::CheckGradients(params, [&] { return sum_all(tanh_op(ApplyMha(q, kv, mha))); });
  CHECK_MESSAGE(res.ok, res.detail);
}
