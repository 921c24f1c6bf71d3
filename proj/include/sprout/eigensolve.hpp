// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace sprout {

/// Dense symmetric matrix in double precision. Construction symmetrizes via
/// (A + A^T)/2 and rejects non-finite entries.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(int dim);
  static SymmetricMatrix from_rowmajor(int dim, std::span<const double> data);

  int dim() const { return dim_; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * dim_ + j]; }
  /// Symmetric write: sets (i,j) and (j,i).
  void set(int i, int j, double v) {
    data_[static_cast<std::size_t>(i) * dim_ + j] = v;
    data_[static_cast<std::size_t>(j) * dim_ + i] = v;
  }
  const std::vector<double>& data() const { return data_; }

 private:
  int dim_;
  std::vector<double> data_;
};

struct EigenDecomposition {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // row r = unit eigenvector for values[r]
};

/// All eigenvalues in ascending order (cyclic Jacobi; ties kept stable).
std::vector<double> sym_eigvals(const SymmetricMatrix& m);

EigenDecomposition sym_eig(const SymmetricMatrix& m);

double min_eigval(const SymmetricMatrix& m);

}  // namespace sprout
