// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "sprout/kernels.hpp"
#include "sprout/simd.hpp"

namespace sprout::simd {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("SPROUT_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2_fma()) return Isa::Avx2;
    // Unknown value or unavailable ISA: fall through to detection.
  }
  return cpu_has_avx2_fma() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa> g_active{detect()};
std::atomic<int> g_threads{1};

}  // namespace

Isa active() { return g_active.load(std::memory_order_relaxed); }

bool available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: return cpu_has_avx2_fma();
  }
  return false;
}

void force(Isa isa) {
  if (!available(isa)) throw std::invalid_argument(std::string("isa not available: ") + name(isa));
  g_active.store(isa, std::memory_order_relaxed);
}

void reset() { g_active.store(detect(), std::memory_order_relaxed); }

const char* name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "?";
}

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }
int threads() { return g_threads.load(std::memory_order_relaxed); }

}  // namespace sprout::simd

namespace sprout::kern {

const KernelTable<float>& f32() {
#if defined(__x86_64__) || defined(_M_X64)
  if (simd::active() == simd::Isa::Avx2) return detail::f32_avx2();
#endif
  return detail::f32_scalar();
}

const KernelTable<double>& f64() {
#if defined(__x86_64__) || defined(_M_X64)
  if (simd::active() == simd::Isa::Avx2) return detail::f64_avx2();
#endif
  return detail::f64_scalar();
}

}  // namespace sprout::kern
