// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "sprout/simd.hpp"

namespace sprout::kern {

// Dense numeric inner loops behind runtime ISA dispatch. Every entry has a
// scalar reference implementation and (on x86-64) an AVX2+FMA variant; the
// two are equivalence-tested against each other. All matrices are row-major.
template <typename T>
struct KernelTable {
  // c(m,n) = a(m,k) * b(k,n)          [+= when accumulate]
  void (*gemm_nn)(int m, int k, int n, const T* a, const T* b, T* c, bool accumulate);
  // c(m,n) = a(m,k) * b(n,k)^T
  void (*gemm_nt)(int m, int k, int n, const T* a, const T* b, T* c, bool accumulate);
  // c(m,n) = a(k,m)^T * b(k,n)
  void (*gemm_tn)(int m, int k, int n, const T* a, const T* b, T* c, bool accumulate);

  void (*add)(std::size_t n, const T* a, const T* b, T* out);
  void (*sub)(std::size_t n, const T* a, const T* b, T* out);
  void (*mul)(std::size_t n, const T* a, const T* b, T* out);
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);  // y += alpha * x
  void (*scale)(std::size_t n, T alpha, const T* x, T* out);

  // Exact (erf-form) GeLU: z * Phi(z).
  void (*gelu)(std::size_t n, const T* z, T* out);
  // gin += gout * gelu'(z)
  void (*gelu_grad)(std::size_t n, const T* z, const T* gout, T* gin);

  void (*softmax_row)(int cols, const T* x, T* out);
  T (*reduce_sum)(std::size_t n, const T* x);
  T (*reduce_max)(std::size_t n, const T* x);

  // s(d,d) += sum_i w[i] * x[i,:] x[i,:]^T   (symmetric rank-1 accumulation)
  void (*weighted_gram)(int count, int dim, const T* x, const T* w, T* s);
};

const KernelTable<float>& f32();
const KernelTable<double>& f64();

template <typename T>
const KernelTable<T>& table();

template <>
inline const KernelTable<float>& table<float>() { return f32(); }
template <>
inline const KernelTable<double>& table<double>() { return f64(); }

namespace detail {
// Per-ISA tables, exposed for the equivalence tests.
const KernelTable<float>& f32_scalar();
const KernelTable<double>& f64_scalar();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable<float>& f32_avx2();
const KernelTable<double>& f64_avx2();
#endif
}  // namespace detail

}  // namespace sprout::kern
