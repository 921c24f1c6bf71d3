// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sprout/tensor.hpp"

namespace sprout {

/// A differentiable scalar loss built from a fresh 1-D parameter tensor.
template <typename T>
using ParamLossFn = std::function<Tensor<T>(const Tensor<T>& params)>;

/// Hessian-vector product by central differences of gradients:
///   (grad(p + eps v) - grad(p - eps v)) / (2 eps),  eps = 1e-3 * max(1, |p|_inf).
/// Exact for quadratics up to rounding. Run on double for oracle use; the
/// float instantiation exists for parity with the training type.
template <typename T>
std::vector<T> hvp(const ParamLossFn<T>& loss_fn, std::span<const T> params, std::span<const T> v);

/// Gradient of loss_fn at p (single reverse sweep); the building block hvp
/// differentiates.
template <typename T>
std::vector<T> gradient_at(const ParamLossFn<T>& loss_fn, std::span<const T> p);

}  // namespace sprout
