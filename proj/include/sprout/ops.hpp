// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "sprout/tensor.hpp"

namespace sprout::ops {

// Graph-recording tensor operations. Shapes are validated; violations throw
// std::invalid_argument. All ops are pure (no input is modified).

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T alpha);

// a + b where b's shape is a trailing suffix of a's (bias rows, positional
// tables). Gradient of b sums over the leading replication.
template <typename T> Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b);

// Replicate a tensor across a new leading axis of extent `count`.
template <typename T> Tensor<T> expand_leading(const Tensor<T>& t, int count);

// 2-D matrix product (m,k)x(k,n). Higher ranks: equal leading batch dims,
// matrix product over the last two.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x(..., in) * w(out, in)^T + b(out). The layer primitive: its saved input
// goes through the shared-input cache of the active forward context.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w);

template <typename T> Tensor<T> gelu(const Tensor<T>& z);
template <typename T> Tensor<T> softmax_lastdim(const Tensor<T>& x);
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-6));

template <typename T> Tensor<T> reshape(const Tensor<T>& t, std::vector<int> shape);
template <typename T> Tensor<T> permute(const Tensor<T>& t, const std::vector<int>& perm);
// Drop axis 0, keeping slice `index` (a contiguous block).
template <typename T> Tensor<T> slice_axis0(const Tensor<T>& t, int index);
// Concatenate two rank-3 tensors along axis 1.
template <typename T> Tensor<T> concat_axis1(const Tensor<T>& a, const Tensor<T>& b);
// (B, S, D) -> (B, D), picking one index of axis 1.
template <typename T> Tensor<T> select_axis1(const Tensor<T>& t, int index);

// out = base; out[..., cols[i]] += addend[..., i]. Used to route growth
// branch outputs back onto their host neurons.
template <typename T>
Tensor<T> scatter_add_cols(const Tensor<T>& base, const Tensor<T>& addend, const std::vector<int>& cols);

template <typename T> Tensor<T> sum(const Tensor<T>& t);
template <typename T> Tensor<T> mean(const Tensor<T>& t);

// Mean cross-entropy over the batch; logits (B, K), labels in [0, K).
template <typename T>
Tensor<T> cross_entropy_mean(const Tensor<T>& logits, const std::vector<int>& labels);

}  // namespace sprout::ops
