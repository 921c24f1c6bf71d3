// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scalar reference kernels. These define the semantics the SIMD variants
// must reproduce; keep them simple and obviously correct.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>

#include "sprout/gelu_math.hpp"
#include "sprout/kernels.hpp"
#include "src/kernels/thread_pool.hpp"

namespace sprout::kern::scalar {

template <typename T>
void gemm_nn(int m, int k, int n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
  parallel_rows(m, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const T* ai = a + static_cast<std::size_t>(i) * k;
      T* ci = c + static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const T aip = ai[p];
        const T* bp = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
  });
}

template <typename T>
void gemm_nt(int m, int k, int n, const T* a, const T* b, T* c, bool accumulate) {
  parallel_rows(m, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const T* ai = a + static_cast<std::size_t>(i) * k;
      T* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const T* bj = b + static_cast<std::size_t>(j) * k;
        T acc = 0;
        for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] = accumulate ? ci[j] + acc : acc;
      }
    }
  });
}

template <typename T>
void gemm_tn(int m, int k, int n, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
  // C[i,j] = sum_p A[p,i] * B[p,j]; split over columns so writes stay disjoint.
  parallel_cols(n, [&](int j0, int j1) {
    for (int p = 0; p < k; ++p) {
      const T* ap = a + static_cast<std::size_t>(p) * m;
      const T* bp = b + static_cast<std::size_t>(p) * n;
      for (int i = 0; i < m; ++i) {
        const T api = ap[i];
        T* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = j0; j < j1; ++j) ci[j] += api * bp[j];
      }
    }
  });
}

template <typename T>
void add(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(std::size_t n, T alpha, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
void gelu(std::size_t n, const T* z, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(gelu_value(static_cast<double>(z[i])));
}

template <typename T>
void gelu_grad(std::size_t n, const T* z, const T* gout, T* gin) {
  for (std::size_t i = 0; i < n; ++i)
    gin[i] += gout[i] * static_cast<T>(gelu_deriv(static_cast<double>(z[i])));
}

template <typename T>
void softmax_row(int cols, const T* x, T* out) {
  T mx = x[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  T sum = 0;
  for (int j = 0; j < cols; ++j) {
    out[j] = std::exp(x[j] - mx);
    sum += out[j];
  }
  const T inv = T(1) / sum;
  for (int j = 0; j < cols; ++j) out[j] *= inv;
}

template <typename T>
T reduce_sum(std::size_t n, const T* x) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T reduce_max(std::size_t n, const T* x) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  return mx;
}

template <typename T>
void weighted_gram(int count, int dim, const T* x, const T* w, T* s) {
  parallel_rows(dim, [&](int a0, int a1) {
    for (int i = 0; i < count; ++i) {
      const T* xi = x + static_cast<std::size_t>(i) * dim;
      const T wi = w[i];
      for (int a = a0; a < a1; ++a) {
        const T wxa = wi * xi[a];
        T* sa = s + static_cast<std::size_t>(a) * dim;
        for (int b = 0; b < dim; ++b) sa[b] += wxa * xi[b];
      }
    }
  });
}

}  // namespace sprout::kern::scalar
