// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sprout/batch.hpp"
#include "sprout/growth.hpp"
#include "sprout/hessian.hpp"
#include "sprout/model.hpp"

namespace sprout {

/// When to scale, which neurons, and under what parameter ceiling.
struct ScheduleConfig {
  int initial_warmup = 50;
  int scaling_interval = 30;
  std::int64_t parameter_budget = 0;  // per event; must be set before planning
  int layer_threshold = 60;           // min eligible neurons a layer needs
  std::int64_t target_params = 0;     // 0 = no ceiling
  std::int64_t target_tolerance = 0;
  double scaling_factor = 0.2;
  /// "smallest negative eigenvalues": most-negative-first by default, with
  /// the literal nearest-zero reading behind a switch.
  enum class Selection { MostNegative, NearestZero };
  Selection selection = Selection::MostNegative;
  double eligibility_threshold = -1e-6;  // saddle signal: min eigenvalue below this

  void validate() const;
};

struct PlanEntry {
  std::string layer_id;
  int in_dim = 0;
  std::vector<int> indices;          // ascending
  std::vector<double> eigenvalues;   // parallel to indices
};

struct GrowthPlan {
  int event_epoch = 0;
  std::vector<PlanEntry> entries;
  std::int64_t projected_param_delta = 0;

  bool empty() const { return entries.empty(); }
  std::int64_t neuron_count() const;
};

/// Spectrum plus the host layer's fan-in (the per-neuron growth cost).
struct LayerSpectrumInput {
  SplittingSpectrum spectrum;
  int in_dim = 0;
};

/// True at warmup-aligned interval epochs while below the target band.
bool should_scale(int epoch, const ScheduleConfig& cfg, std::int64_t current_params);

/// Pool eligible neurons across layers that clear layer_threshold, order by
/// eigenvalue (ties by layer id then neuron index), and take the longest
/// prefix whose cost fits parameter_budget.
GrowthPlan build_plan(std::span<const LayerSpectrumInput> spectra, const ScheduleConfig& cfg);

struct ApplyResult {
  std::int64_t actual_param_delta = 0;
  std::int64_t serial_cutoff = 0;  // first serial created by this event
  PreservationReport preservation;
};

/// Execute every entry of the plan via grow(), then verify function
/// preservation on the probes. Validates everything up front so a bad plan
/// leaves the model untouched.
ApplyResult apply_plan(Model& model, const GrowthPlan& plan, const ScheduleConfig& cfg,
                       const std::vector<TensorF>& probes);

/// Events implied by (warmup, interval) over a fixed epoch horizon, ignoring
/// the parameter ceiling.
std::vector<int> scheduled_epochs(const ScheduleConfig& cfg, int total_epochs);

}  // namespace sprout
