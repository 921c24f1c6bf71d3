// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "sprout/config.hpp"
#include "sprout/dataset.hpp"
#include "sprout/metrics.hpp"
#include "sprout/model.hpp"

namespace sprout {

struct EvalResult {
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
};

EvalResult evaluate(const Model& model, const Dataset& ds, int batch_size);

struct TrainResult {
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
  std::filesystem::path plan_log_path;
  std::vector<MetricsRecord> metrics;
  int growth_events = 0;
  std::int64_t final_params = 0;
  std::int64_t iterations = 0;
  // Median |negative min-eigenvalue| across analyzed layers, one entry per
  // scaling-event epoch; feeds the saddle-shrinkage report.
  std::vector<std::pair<int, double>> event_negative_medians;
};

/// The grow-while-training loop: per epoch a full train pass and an eval
/// pass; at scheduled epochs the model is frozen, spectra are estimated on
/// held-out batches, a plan is built and applied with function-preservation
/// verification, and the optimizer is extended with zero-moment slots for
/// the new parameters. Growth never adds training iterations.
TrainResult train(const RunConfig& cfg);

}  // namespace sprout
