// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma in its own TU and
// reached only through runtime dispatch, so the rest of the library stays
// baseline-x86_64. Scalar tails reuse the reference implementations.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "src/kernels/scalar_impl.hpp"
#include "src/kernels/thread_pool.hpp"

namespace sprout::kern::detail {

namespace {

// ---------------------------------------------------------------------------
// f32 vector math
// ---------------------------------------------------------------------------

// exp(x) for float lanes, Cephes-style range reduction + degree-5 polynomial.
// Max observed error ~2 ulp over [-87, 88].
inline __m256 exp256_ps(__m256 x) {
  const __m256 log2ef = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-87.3365478515625f);

  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);

  __m256 fx = _mm256_fmadd_ps(x, log2ef, _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);

  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);

  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, x);
  y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));

  const __m256i n = _mm256_cvtps_epi32(fx);
  const __m256i pow2n =
      _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(0x7f)), 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(pow2n));
}

// erf(x) via the Abramowitz-Stegun 7.1.26 rational approximation,
// |error| <= 1.5e-7 absolute.
inline __m256 erf256_ps(__m256 x) {
  const __m256 sign_mask = _mm256_set1_ps(-0.0f);
  const __m256 sign = _mm256_and_ps(x, sign_mask);
  const __m256 ax = _mm256_andnot_ps(sign_mask, x);

  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 t = _mm256_div_ps(one, _mm256_fmadd_ps(_mm256_set1_ps(0.3275911f), ax, one));

  __m256 p = _mm256_set1_ps(1.061405429f);
  p = _mm256_fmadd_ps(p, t, _mm256_set1_ps(-1.453152027f));
  p = _mm256_fmadd_ps(p, t, _mm256_set1_ps(1.421413741f));
  p = _mm256_fmadd_ps(p, t, _mm256_set1_ps(-0.284496736f));
  p = _mm256_fmadd_ps(p, t, _mm256_set1_ps(0.254829592f));
  p = _mm256_mul_ps(p, t);

  const __m256 e = exp256_ps(_mm256_sub_ps(_mm256_setzero_ps(), _mm256_mul_ps(ax, ax)));
  const __m256 y = _mm256_fnmadd_ps(p, e, one);
  return _mm256_or_ps(y, sign);
}

void gelu_f32(std::size_t n, const float* z, float* out) {
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 inv_sqrt2 = _mm256_set1_ps(0.70710678118654752f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 zi = _mm256_loadu_ps(z + i);
    const __m256 cdf = _mm256_mul_ps(half, _mm256_add_ps(one, erf256_ps(_mm256_mul_ps(zi, inv_sqrt2))));
    _mm256_storeu_ps(out + i, _mm256_mul_ps(zi, cdf));
  }
  if (i < n) scalar::gelu<float>(n - i, z + i, out + i);
}

void gelu_grad_f32(std::size_t n, const float* z, const float* gout, float* gin) {
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 inv_sqrt2 = _mm256_set1_ps(0.70710678118654752f);
  const __m256 inv_sqrt2pi = _mm256_set1_ps(0.39894228040143268f);
  const __m256 neg_half = _mm256_set1_ps(-0.5f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 zi = _mm256_loadu_ps(z + i);
    const __m256 cdf = _mm256_mul_ps(half, _mm256_add_ps(one, erf256_ps(_mm256_mul_ps(zi, inv_sqrt2))));
    const __m256 pdf = _mm256_mul_ps(inv_sqrt2pi, exp256_ps(_mm256_mul_ps(neg_half, _mm256_mul_ps(zi, zi))));
    const __m256 d = _mm256_fmadd_ps(zi, pdf, cdf);
    const __m256 g = _mm256_fmadd_ps(_mm256_loadu_ps(gout + i), d, _mm256_loadu_ps(gin + i));
    _mm256_storeu_ps(gin + i, g);
  }
  if (i < n) scalar::gelu_grad<float>(n - i, z + i, gout + i, gin + i);
}

void softmax_row_f32(int cols, const float* x, float* out) {
  const std::size_t n = static_cast<std::size_t>(cols);
  // max
  float mx;
  {
    std::size_t i = 0;
    __m256 vmax = _mm256_set1_ps(-std::numeric_limits<float>::infinity());
    for (; i + 8 <= n; i += 8) vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(x + i));
    alignas(32) float tmp[8];
    _mm256_store_ps(tmp, vmax);
    mx = tmp[0];
    for (int j = 1; j < 8; ++j) mx = std::max(mx, tmp[j]);
    for (; i < n; ++i) mx = std::max(mx, x[i]);
  }
  // exp + sum
  float sum = 0.0f;
  {
    std::size_t i = 0;
    const __m256 vmx = _mm256_set1_ps(mx);
    __m256 vsum = _mm256_setzero_ps();
    for (; i + 8 <= n; i += 8) {
      const __m256 e = exp256_ps(_mm256_sub_ps(_mm256_loadu_ps(x + i), vmx));
      _mm256_storeu_ps(out + i, e);
      vsum = _mm256_add_ps(vsum, e);
    }
    alignas(32) float tmp[8];
    _mm256_store_ps(tmp, vsum);
    for (int j = 0; j < 8; ++j) sum += tmp[j];
    for (; i < n; ++i) {
      out[i] = std::exp(x[i] - mx);
      sum += out[i];
    }
  }
  const float inv = 1.0f / sum;
  std::size_t i = 0;
  const __m256 vinv = _mm256_set1_ps(inv);
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(out + i), vinv));
  for (; i < n; ++i) out[i] *= inv;
}

// ---------------------------------------------------------------------------
// f32 gemm
// ---------------------------------------------------------------------------

void gemm_nn_f32(int m, int k, int n, const float* a, const float* b, float* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<std::size_t>(m) * n);
  parallel_rows(m, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const float* ai = a + static_cast<std::size_t>(i) * k;
      float* ci = c + static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const __m256 aip = _mm256_set1_ps(ai[p]);
        const float* bp = b + static_cast<std::size_t>(p) * n;
        int j = 0;
        for (; j + 8 <= n; j += 8) {
          const __m256 cv = _mm256_fmadd_ps(aip, _mm256_loadu_ps(bp + j), _mm256_loadu_ps(ci + j));
          _mm256_storeu_ps(ci + j, cv);
        }
        const float s = ai[p];
        for (; j < n; ++j) ci[j] += s * bp[j];
      }
    }
  });
}

inline float hsum256(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

void gemm_nt_f32(int m, int k, int n, const float* a, const float* b, float* c, bool accumulate) {
  parallel_rows(m, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const float* ai = a + static_cast<std::size_t>(i) * k;
      float* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const float* bj = b + static_cast<std::size_t>(j) * k;
        __m256 acc = _mm256_setzero_ps();
        int p = 0;
        for (; p + 8 <= k; p += 8)
          acc = _mm256_fmadd_ps(_mm256_loadu_ps(ai + p), _mm256_loadu_ps(bj + p), acc);
        float dot = hsum256(acc);
        for (; p < k; ++p) dot += ai[p] * bj[p];
        ci[j] = accumulate ? ci[j] + dot : dot;
      }
    }
  });
}

void gemm_tn_f32(int m, int k, int n, const float* a, const float* b, float* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<std::size_t>(m) * n);
  parallel_cols(n, [&](int j0, int j1) {
    const int jv_end = j0 + ((j1 - j0) / 8) * 8;
    for (int p = 0; p < k; ++p) {
      const float* ap = a + static_cast<std::size_t>(p) * m;
      const float* bp = b + static_cast<std::size_t>(p) * n;
      for (int i = 0; i < m; ++i) {
        const __m256 api = _mm256_set1_ps(ap[i]);
        float* ci = c + static_cast<std::size_t>(i) * n;
        int j = j0;
        for (; j < jv_end; j += 8) {
          const __m256 cv = _mm256_fmadd_ps(api, _mm256_loadu_ps(bp + j), _mm256_loadu_ps(ci + j));
          _mm256_storeu_ps(ci + j, cv);
        }
        const float s = ap[i];
        for (; j < j1; ++j) ci[j] += s * bp[j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// f32 elementwise / reductions
// ---------------------------------------------------------------------------

void add_f32(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_f32(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_f32(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_f32(std::size_t n, float alpha, const float* x, float* out) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

float reduce_sum_f32(std::size_t n, const float* x) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum256(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

float reduce_max_f32(std::size_t n, const float* x) {
  float mx = -std::numeric_limits<float>::infinity();
  __m256 vmax = _mm256_set1_ps(mx);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(x + i));
  alignas(32) float tmp[8];
  _mm256_store_ps(tmp, vmax);
  for (int j = 0; j < 8; ++j) mx = std::max(mx, tmp[j]);
  for (; i < n; ++i) mx = std::max(mx, x[i]);
  return mx;
}

void weighted_gram_f32(int count, int dim, const float* x, const float* w, float* s) {
  parallel_rows(dim, [&](int a0, int a1) {
    for (int i = 0; i < count; ++i) {
      const float* xi = x + static_cast<std::size_t>(i) * dim;
      const float wi = w[i];
      for (int a = a0; a < a1; ++a) {
        const __m256 wxa = _mm256_set1_ps(wi * xi[a]);
        float* sa = s + static_cast<std::size_t>(a) * dim;
        int b = 0;
        for (; b + 8 <= dim; b += 8)
          _mm256_storeu_ps(sa + b, _mm256_fmadd_ps(wxa, _mm256_loadu_ps(xi + b), _mm256_loadu_ps(sa + b)));
        const float sxa = wi * xi[a];
        for (; b < dim; ++b) sa[b] += sxa * xi[b];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// f64 variants (4-wide). Transcendentals stay on the scalar reference path;
// the double tables exist for the oracle code where gemm and the gram
// accumulation dominate.
// ---------------------------------------------------------------------------

void gemm_nn_f64(int m, int k, int n, const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  parallel_rows(m, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const double* ai = a + static_cast<std::size_t>(i) * k;
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const __m256d aip = _mm256_set1_pd(ai[p]);
        const double* bp = b + static_cast<std::size_t>(p) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
          const __m256d cv = _mm256_fmadd_pd(aip, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j));
          _mm256_storeu_pd(ci + j, cv);
        }
        const double s = ai[p];
        for (; j < n; ++j) ci[j] += s * bp[j];
      }
    }
  });
}

inline double hsum256d(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

void gemm_nt_f64(int m, int k, int n, const double* a, const double* b, double* c, bool accumulate) {
  parallel_rows(m, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const double* ai = a + static_cast<std::size_t>(i) * k;
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<std::size_t>(j) * k;
        __m256d acc = _mm256_setzero_pd();
        int p = 0;
        for (; p + 4 <= k; p += 4)
          acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), acc);
        double dot = hsum256d(acc);
        for (; p < k; ++p) dot += ai[p] * bj[p];
        ci[j] = accumulate ? ci[j] + dot : dot;
      }
    }
  });
}

void gemm_tn_f64(int m, int k, int n, const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  parallel_cols(n, [&](int j0, int j1) {
    const int jv_end = j0 + ((j1 - j0) / 4) * 4;
    for (int p = 0; p < k; ++p) {
      const double* ap = a + static_cast<std::size_t>(p) * m;
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int i = 0; i < m; ++i) {
        const __m256d api = _mm256_set1_pd(ap[i]);
        double* ci = c + static_cast<std::size_t>(i) * n;
        int j = j0;
        for (; j < jv_end; j += 4) {
          const __m256d cv = _mm256_fmadd_pd(api, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j));
          _mm256_storeu_pd(ci + j, cv);
        }
        const double s = ap[i];
        for (; j < j1; ++j) ci[j] += s * bp[j];
      }
    }
  });
}

void add_f64(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_f64(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_f64(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_f64(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_f64(std::size_t n, double alpha, const double* x, double* out) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

double reduce_sum_f64(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum256d(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double reduce_max_f64(std::size_t n, const double* x) {
  double mx = -std::numeric_limits<double>::infinity();
  __m256d vmax = _mm256_set1_pd(mx);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(x + i));
  alignas(32) double tmp[4];
  _mm256_store_pd(tmp, vmax);
  for (int j = 0; j < 4; ++j) mx = std::max(mx, tmp[j]);
  for (; i < n; ++i) mx = std::max(mx, x[i]);
  return mx;
}

void weighted_gram_f64(int count, int dim, const double* x, const double* w, double* s) {
  parallel_rows(dim, [&](int a0, int a1) {
    for (int i = 0; i < count; ++i) {
      const double* xi = x + static_cast<std::size_t>(i) * dim;
      const double wi = w[i];
      for (int a = a0; a < a1; ++a) {
        const __m256d wxa = _mm256_set1_pd(wi * xi[a]);
        double* sa = s + static_cast<std::size_t>(a) * dim;
        int b = 0;
        for (; b + 4 <= dim; b += 4)
          _mm256_storeu_pd(sa + b, _mm256_fmadd_pd(wxa, _mm256_loadu_pd(xi + b), _mm256_loadu_pd(sa + b)));
        const double sxa = wi * xi[a];
        for (; b < dim; ++b) sa[b] += sxa * xi[b];
      }
    }
  });
}

}  // namespace

const KernelTable<float>& f32_avx2() {
  static const KernelTable<float> t = [] {
    KernelTable<float> k;
    k.gemm_nn = &gemm_nn_f32;
    k.gemm_nt = &gemm_nt_f32;
    k.gemm_tn = &gemm_tn_f32;
    k.add = &add_f32;
    k.sub = &sub_f32;
    k.mul = &mul_f32;
    k.axpy = &axpy_f32;
    k.scale = &scale_f32;
    k.gelu = &gelu_f32;
    k.gelu_grad = &gelu_grad_f32;
    k.softmax_row = &softmax_row_f32;
    k.reduce_sum = &reduce_sum_f32;
    k.reduce_max = &reduce_max_f32;
    k.weighted_gram = &weighted_gram_f32;
    return k;
  }();
  return t;
}

const KernelTable<double>& f64_avx2() {
  static const KernelTable<double> t = [] {
    KernelTable<double> k;
    k.gemm_nn = &gemm_nn_f64;
    k.gemm_nt = &gemm_nt_f64;
    k.gemm_tn = &gemm_tn_f64;
    k.add = &add_f64;
    k.sub = &sub_f64;
    k.mul = &mul_f64;
    k.axpy = &axpy_f64;
    k.scale = &scale_f64;
    k.gelu = &scalar::gelu<double>;
    k.gelu_grad = &scalar::gelu_grad<double>;
    k.softmax_row = &scalar::softmax_row<double>;
    k.reduce_sum = &reduce_sum_f64;
    k.reduce_max = &reduce_max_f64;
    k.weighted_gram = &weighted_gram_f64;
    return k;
  }();
  return t;
}

}  // namespace sprout::kern::detail

#endif  // x86_64
