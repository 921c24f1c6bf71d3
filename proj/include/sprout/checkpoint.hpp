// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "sprout/model.hpp"

namespace sprout {

// Versioned binary container: config, growth history, and every named
// parameter tensor (name, shape, little-endian float32 data). The exact
// layout is documented in docs/checkpoint_format.md and is stable across
// versions of this library.

void save_checkpoint(Model& model, const std::filesystem::path& path);

Model load_checkpoint(const std::filesystem::path& path);

}  // namespace sprout
