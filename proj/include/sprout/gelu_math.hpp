// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

namespace sprout {

// Exact (erf-form) GeLU and its first two derivatives. The second derivative
// feeds the per-neuron curvature estimate, so the erf form is used
// throughout; the tanh approximation drifts near |z| ~ 2.

inline double gelu_value(double z) {
  return 0.5 * z * (1.0 + std::erf(z * 0.7071067811865475244));
}

// gelu'(z) = Phi(z) + z phi(z)
inline double gelu_deriv(double z) {
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  const double cdf = 0.5 * (1.0 + std::erf(z * 0.7071067811865475244));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
  return cdf + z * pdf;
}

// gelu''(z) = phi(z) (2 - z^2)
inline double gelu_deriv2(double z) {
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
  return pdf * (2.0 - z * z);
}

}  // namespace sprout
