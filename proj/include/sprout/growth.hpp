// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sprout/model.hpp"

namespace sprout {

/// Attach a +/- branch over `indices` of `layer`, initialised from the
/// layer's current rows scaled by `scaling_factor` with the minus side an
/// exact bitwise negation. The layer's own weights are untouched and the
/// model function is preserved. Returns the new branch.
template <typename T>
GrowthBranchT<T>& grow(GrowableLinearT<T>& layer, ModelT<T>& model,
                       const std::vector<int>& indices, T scaling_factor, int epoch);

/// Parameters added by growing `n_indices` neurons of fan-in `in_dim`.
inline std::int64_t branch_param_delta(std::int64_t n_indices, std::int64_t in_dim) {
  return 2 * n_indices * (in_dim + 1);
}

struct PreservationReport {
  float max_dev_f32 = 0.0f;   // max |logit delta| over probes, float path
  double max_dev_f64 = 0.0;   // same under double-precision recomputation
};

/// Compare model logits with and without branches at serial >= cutoff on a
/// set of probe images. A violation is reported, never thrown.
PreservationReport verify_function_preservation(const Model& model, std::int64_t serial_cutoff,
                                                const std::vector<TensorF>& probes,
                                                bool with_f64_shadow = true);

}  // namespace sprout
