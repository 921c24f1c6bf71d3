// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sprout {

SymmetricMatrix::SymmetricMatrix(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("SymmetricMatrix: dim must be >= 1");
  data_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
}

SymmetricMatrix SymmetricMatrix::from_rowmajor(int dim, std::span<const double> data) {
  if (dim < 1) throw std::invalid_argument("SymmetricMatrix: dim must be >= 1");
  if (data.size() != static_cast<std::size_t>(dim) * dim)
    throw std::invalid_argument("SymmetricMatrix: data length does not match dim^2");
  SymmetricMatrix m(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      const double a = data[static_cast<std::size_t>(i) * dim + j];
      const double b = data[static_cast<std::size_t>(j) * dim + i];
      if (!std::isfinite(a))
        throw std::invalid_argument("SymmetricMatrix: non-finite entry");
      m.data_[static_cast<std::size_t>(i) * dim + j] = 0.5 * (a + b);
    }
  return m;
}

namespace {

// Cyclic Jacobi rotations. Converges when the off-diagonal Frobenius norm
// drops below 1e-11 * ||A||_F, capped at 100 sweeps; plenty for dim <= 512.
void jacobi(std::vector<double>& a, int n, std::vector<double>* vecs) {
  if (vecs) {
    vecs->assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) (*vecs)[static_cast<std::size_t>(i) * n + i] = 1.0;
  }
  double fro = 0.0;
  for (double v : a) fro += v * v;
  fro = std::sqrt(fro);
  const double threshold = 1e-11 * (fro > 0 ? fro : 1.0);

  auto off_norm = [&] {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double v = a[static_cast<std::size_t>(i) * n + j];
        s += 2.0 * v * v;
      }
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100; ++sweep) {
    if (off_norm() <= threshold) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<std::size_t>(p) * n + q];
        if (apq == 0.0) continue;
        const double app = a[static_cast<std::size_t>(p) * n + p];
        const double aqq = a[static_cast<std::size_t>(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double akp = a[static_cast<std::size_t>(k) * n + p];
          const double akq = a[static_cast<std::size_t>(k) * n + q];
          a[static_cast<std::size_t>(k) * n + p] = c * akp - s * akq;
          a[static_cast<std::size_t>(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[static_cast<std::size_t>(p) * n + k];
          const double aqk = a[static_cast<std::size_t>(q) * n + k];
          a[static_cast<std::size_t>(p) * n + k] = c * apk - s * aqk;
          a[static_cast<std::size_t>(q) * n + k] = s * apk + c * aqk;
        }
        if (vecs) {
          for (int k = 0; k < n; ++k) {
            const double vkp = (*vecs)[static_cast<std::size_t>(p) * n + k];
            const double vkq = (*vecs)[static_cast<std::size_t>(q) * n + k];
            (*vecs)[static_cast<std::size_t>(p) * n + k] = c * vkp - s * vkq;
            (*vecs)[static_cast<std::size_t>(q) * n + k] = s * vkp + c * vkq;
          }
        }
      }
    }
  }
}

}  // namespace

EigenDecomposition sym_eig(const SymmetricMatrix& m) {
  const int n = m.dim();
  std::vector<double> a(m.data());
  std::vector<double> vecs;
  jacobi(a, n, &vecs);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return a[static_cast<std::size_t>(i) * n + i] < a[static_cast<std::size_t>(j) * n + j];
  });

  EigenDecomposition out;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors.resize(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r) {
    const int src = order[static_cast<std::size_t>(r)];
    out.values[static_cast<std::size_t>(r)] = a[static_cast<std::size_t>(src) * n + src];
    for (int k = 0; k < n; ++k)
      out.vectors[static_cast<std::size_t>(r) * n + k] = vecs[static_cast<std::size_t>(src) * n + k];
  }
  return out;
}

std::vector<double> sym_eigvals(const SymmetricMatrix& m) {
  const int n = m.dim();
  std::vector<double> a(m.data());
  jacobi(a, n, nullptr);
  std::vector<double> vals(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) vals[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i) * n + i];
  std::stable_sort(vals.begin(), vals.end());
  return vals;
}

double min_eigval(const SymmetricMatrix& m) { return sym_eigvals(m).front(); }

}  // namespace sprout
