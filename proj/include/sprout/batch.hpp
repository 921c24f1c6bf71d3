// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sprout/tensor.hpp"

namespace sprout {

struct LabeledBatch {
  TensorF images;           // (B, C, H, W)
  std::vector<int> labels;  // length B
};

}  // namespace sprout
