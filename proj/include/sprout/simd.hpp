// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace sprout::simd {

/// Instruction sets the kernel layer can dispatch to.
enum class Isa {
  Scalar,
  Avx2,  // AVX2 + FMA
};

/// The ISA the dispatch tables currently resolve to.
Isa active();

/// True if the running CPU (and this build) can execute `isa` kernels.
bool available(Isa isa);

/// Pin dispatch to a specific ISA. Throws std::invalid_argument if the
/// ISA is unavailable on this machine.
void force(Isa isa);

/// Re-run detection (honours the SPROUT_SIMD env var: "scalar" | "avx2").
void reset();

const char* name(Isa isa);

/// Worker count for kernels that split work across threads. Partitioning
/// is by output rows/columns so results are bitwise independent of the
/// thread count.
void set_threads(int n);
int threads();

}  // namespace sprout::simd
