// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sprout/batch.hpp"
#include "sprout/eigensolve.hpp"
#include "sprout/model.hpp"

namespace sprout {

/// Per-neuron minimum eigenvalue of the curvature estimate for one layer at
/// one training step.
struct SplittingSpectrum {
  std::string layer_id;
  int epoch = 0;
  std::vector<double> min_eigvals;  // index = neuron
  double negative_mass = 0.0;       // sum of |lambda| over every negative eigenvalue
  int batch_count = 0;
};

struct SpectrumOptions {
  int max_batches = 4;
  /// Report the literal phi'(sigma) sigma'' estimate for linear-output
  /// neurons too (identically zero) instead of the row-Hessian fallback.
  bool analytic_only = false;
  int epoch = 0;
};

/// Per-token records for a GeLU-fronted layer, gathered over the estimation
/// batches with one forward/backward each. g rows carry a 1/batch_count
/// factor so accumulated matrices are batch means.
struct GeluLayerTraces {
  int in_dim = 0;
  int out_dim = 0;
  int batch_count = 0;
  std::int64_t samples = 0;     // token positions
  std::vector<double> x;        // samples x in_dim
  std::vector<double> z;        // samples x out_dim, layer output (pre-GeLU)
  std::vector<double> g;        // samples x out_dim, dLoss/dAct
};

GeluLayerTraces collect_gelu_traces(Model& model, std::span<const LabeledBatch> batches,
                                    const std::string& layer_id, int max_batches);

/// sum_n g[n,j] gelu''(z[n,j]) x_n x_n^T over the collected tokens.
SymmetricMatrix splitting_matrix_from_traces(const GeluLayerTraces& traces, int neuron);

/// The per-neuron curvature matrix (in_dim x in_dim). GeLU-fronted neurons
/// use the analytic estimate above; linear-output neurons fall back to the
/// finite-difference row Hessian unless opts.analytic_only asks for the literal
/// (zero) form.
SymmetricMatrix splitting_matrix(Model& model, const std::string& layer_id, int neuron,
                                 std::span<const LabeledBatch> batches,
                                 const SpectrumOptions& opts = {});

/// Exact fan-in block Hessian of the loss restricted to one neuron's weight
/// row, assembled from in_dim HVP columns on a double-precision shadow.
SymmetricMatrix linear_row_hessian(const Model& model, const std::string& layer_id, int neuron,
                                   std::span<const LabeledBatch> batches, int max_batches);

SplittingSpectrum layer_spectrum(Model& model, const std::string& layer_id,
                                 std::span<const LabeledBatch> batches, const SpectrumOptions& opts);

/// Writes {dir}/{epoch}/{layer_id}.csv and .svg per spectrum. The CSV has
/// columns epoch,layer_id,neuron_index,min_eigval (9 significant digits); the
/// SVG scatters |min eigenvalue| of the negative entries by neuron index.
std::vector<std::filesystem::path> export_spectrum(std::span<const SplittingSpectrum> spectra,
                                                   const std::filesystem::path& dir);

/// Parse-back of the exported CSV format (one layer per file).
SplittingSpectrum import_spectrum_csv(const std::filesystem::path& file);

}  // namespace sprout
