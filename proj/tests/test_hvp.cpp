// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "sprout/hvp.hpp"
#include "sprout/ops.hpp"
#include "sprout/rng.hpp"

using namespace sprout;
namespace O = sprout::ops;

namespace {

// L = 1/2 p^T A p for symmetric A, built through the tensor graph.
ParamLossFn<double> quadratic_loss(const std::vector<double>& a, int n) {
  return [a, n](const TensorD& p) {
    auto A = TensorD::from({n, n}, a);
    auto col = O::reshape(p, {n, 1});
    auto Ap = O::matmul(A, col);
    return O::scale(O::sum(O::mul(col, Ap)), 0.5);
  };
}

}  // namespace

TEST_CASE("hvp on a quadratic reproduces A v within 1e-6") {
  Rng rng(31);
  const int n = 6;
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      a[static_cast<std::size_t>(i) * n + j] = v;
      a[static_cast<std::size_t>(j) * n + i] = v;
    }
  std::vector<double> p(n), v(n);
  for (auto& x : p) x = rng.uniform(-1.0, 1.0);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);

  const auto hv = hvp<double>(quadratic_loss(a, n), p, v);
  for (int i = 0; i < n; ++i) {
    double want = 0;
    for (int j = 0; j < n; ++j) want += a[static_cast<std::size_t>(i) * n + j] * v[j];
    CHECK(std::abs(hv[static_cast<std::size_t>(i)] - want) <= 1e-6);
  }
}

TEST_CASE("hvp of the zero direction is the zero vector") {
  Rng rng(32);
  const int n = 4;
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.25);
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * n + i] = 1.0;
  std::vector<double> p(n, 0.3), v(n, 0.0);
  const auto hv = hvp<double>(quadratic_loss(a, n), p, v);
  for (double x : hv) CHECK(x == 0.0);
}

TEST_CASE("hvp errors: dimension mismatch and non-finite gradients") {
  std::vector<double> p{1.0, 2.0}, v{1.0};
  auto fn = [](const TensorD& params) { return O::sum(O::mul(params, params)); };
  CHECK_THROWS_AS(hvp<double>(fn, p, v), std::invalid_argument);
  auto bad = [](const TensorD& params) {
    auto inf = TensorD::full(params.shape(), std::numeric_limits<double>::infinity());
    return O::sum(O::mul(params, inf));
  };
  std::vector<double> v2{1.0, 0.0};
  CHECK_THROWS_AS(hvp<double>(bad, p, v2), std::runtime_error);
}

TEST_CASE("8-parameter gelu neuron: assembled hvp columns give a symmetric Hessian") {
  Rng rng(33);
  const int in = 7;  // 7 weights + 1 bias = 8 parameters
  const int samples = 12;
  std::vector<double> xs(static_cast<std::size_t>(samples) * in), ys(samples);
  for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
  for (auto& v : ys) v = rng.uniform(-1.0, 1.0);

  // L = mean_n (gelu(w.x_n + b) - y_n)^2, p = (w, b) split by selector matrices
  ParamLossFn<double> loss = [&](const TensorD& p) {
    auto X = TensorD::from({samples, in}, xs);
    auto wrow = O::reshape(p, {1, 8});
    std::vector<double> sel(static_cast<std::size_t>(8) * in, 0.0);
    for (int i = 0; i < in; ++i) sel[static_cast<std::size_t>(i) * in + i] = 1.0;
    auto W = O::matmul(wrow, TensorD::from({8, in}, sel));  // (1, in)
    std::vector<double> selb(8, 0.0);
    selb[7] = 1.0;
    auto bias = O::matmul(wrow, TensorD::from({8, 1}, selb));  // (1,1)
    auto z = O::add_broadcast(O::matmul(X, O::permute(W, {1, 0})), O::reshape(bias, {1}));
    auto pred = O::gelu(z);
    auto diff = O::sub(pred, TensorD::from({samples, 1}, ys));
    return O::mean(O::mul(diff, diff));
  };

  std::vector<double> params(8);
  for (auto& v : params) v = rng.uniform(-0.8, 0.8);

  std::vector<std::vector<double>> H;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> e(8, 0.0);
    e[static_cast<std::size_t>(i)] = 1.0;
    H.push_back(hvp<double>(loss, params, e));
  }
  double asym = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double d = H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                       H[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      asym += d * d;
    }
  CHECK(std::sqrt(asym) <= 1e-4);
}

TEST_CASE("hvp symmetry: v.(Hw) == w.(Hv) within 1e-3 relative") {
  Rng rng(34);
  const int in = 5, samples = 10;
  std::vector<double> xs(static_cast<std::size_t>(samples) * in), ys(samples);
  for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
  for (auto& v : ys) v = rng.uniform(-1.0, 1.0);
  ParamLossFn<double> loss = [&](const TensorD& p) {
    auto X = TensorD::from({samples, in}, xs);
    auto z = O::matmul(X, O::reshape(p, {in, 1}));
    auto pred = O::gelu(z);
    auto diff = O::sub(pred, TensorD::from({samples, 1}, ys));
    return O::mean(O::mul(diff, diff));
  };
  std::vector<double> p(in), v(in), w(in);
  for (auto& x : p) x = rng.uniform(-1.0, 1.0);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);
  const auto Hw = hvp<double>(loss, p, w);
  const auto Hv = hvp<double>(loss, p, v);
  double vHw = 0, wHv = 0;
  for (int i = 0; i < in; ++i) {
    vHw += v[static_cast<std::size_t>(i)] * Hw[static_cast<std::size_t>(i)];
    wHv += w[static_cast<std::size_t>(i)] * Hv[static_cast<std::size_t>(i)];
  }
  CHECK(std::abs(vHw - wHv) <= 1e-3 * std::max({1e-6, std::abs(vHw), std::abs(wHv)}));
}
