// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "src/kernels/scalar_impl.hpp"

namespace sprout::kern::detail {

namespace {

template <typename T>
KernelTable<T> make_scalar_table() {
  KernelTable<T> t;
  t.gemm_nn = &scalar::gemm_nn<T>;
  t.gemm_nt = &scalar::gemm_nt<T>;
  t.gemm_tn = &scalar::gemm_tn<T>;
  t.add = &scalar::add<T>;
  t.sub = &scalar::sub<T>;
  t.mul = &scalar::mul<T>;
  t.axpy = &scalar::axpy<T>;
  t.scale = &scalar::scale<T>;
  t.gelu = &scalar::gelu<T>;
  t.gelu_grad = &scalar::gelu_grad<T>;
  t.softmax_row = &scalar::softmax_row<T>;
  t.reduce_sum = &scalar::reduce_sum<T>;
  t.reduce_max = &scalar::reduce_max<T>;
  t.weighted_gram = &scalar::weighted_gram<T>;
  return t;
}

}  // namespace

const KernelTable<float>& f32_scalar() {
  static const KernelTable<float> t = make_scalar_table<float>();
  return t;
}

const KernelTable<double>& f64_scalar() {
  static const KernelTable<double> t = make_scalar_table<double>();
  return t;
}

}  // namespace sprout::kern::detail
