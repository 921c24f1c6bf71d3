// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/hvp.hpp"

#include <cmath>
#include <stdexcept>

namespace sprout {

template <typename T>
std::vector<T> gradient_at(const ParamLossFn<T>& loss_fn, std::span<const T> p) {
  Tensor<T> params = Tensor<T>::from({static_cast<int>(p.size())}, std::vector<T>(p.begin(), p.end()), true);
  Tensor<T> loss = loss_fn(params);
  if (loss.numel() != 1) throw std::invalid_argument("hvp: loss_fn must return a scalar");
  backward(loss);
  if (!params.has_grad()) throw std::runtime_error("hvp: loss_fn does not depend on the parameters");
  std::vector<T> g = params.grad();
  for (const T v : g)
    if (!std::isfinite(static_cast<double>(v))) throw std::runtime_error("hvp: non-finite gradient");
  return g;
}

template <typename T>
std::vector<T> hvp(const ParamLossFn<T>& loss_fn, std::span<const T> params, std::span<const T> v) {
  if (params.size() != v.size())
    throw std::invalid_argument("hvp: params and direction have different lengths");
  double pinf = 0.0;
  for (const T x : params) pinf = std::max(pinf, std::abs(static_cast<double>(x)));
  const T eps = static_cast<T>(1e-3 * std::max(1.0, pinf));

  std::vector<T> plus(params.begin(), params.end());
  std::vector<T> minus(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    plus[i] += eps * v[i];
    minus[i] -= eps * v[i];
  }
  const std::vector<T> gp = gradient_at<T>(loss_fn, std::span<const T>(plus));
  const std::vector<T> gm = gradient_at<T>(loss_fn, std::span<const T>(minus));

  std::vector<T> out(params.size());
  const double inv = 1.0 / (2.0 * static_cast<double>(eps));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>((static_cast<double>(gp[i]) - static_cast<double>(gm[i])) * inv);
  return out;
}

template std::vector<float> gradient_at<float>(const ParamLossFn<float>&, std::span<const float>);
template std::vector<double> gradient_at<double>(const ParamLossFn<double>&, std::span<const double>);
template std::vector<float> hvp<float>(const ParamLossFn<float>&, std::span<const float>, std::span<const float>);
template std::vector<double> hvp<double>(const ParamLossFn<double>&, std::span<const double>, std::span<const double>);

}  // namespace sprout
