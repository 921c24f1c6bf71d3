// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sprout/dataset.hpp"
#include "sprout/model.hpp"
#include "sprout/optimizer.hpp"
#include "sprout/scheduler.hpp"

namespace sprout {

/// Everything one experiment needs. Serialized as a flat `key = value` file
/// with dotted keys; parsing is strict (unknown keys are errors) and
/// round-trips losslessly.
struct RunConfig {
  ModelConfig model;
  ScheduleConfig schedule;
  OptimizerConfig optimizer;  // optimizer.lr == 0 selects 5e-4 * batch/512
  double lr_min = 1e-5;
  int lr_warmup_epochs = 5;
  int epochs = 60;
  int batch_size = 64;
  std::uint64_t seed = 42;
  std::string output_dir = "runs/default";
  DatasetSpec dataset;
  int spectrum_batches = 4;
  std::vector<RoleTag> spectrum_roles{RoleTag::FC1};
  bool spectrum_analytic_only = false;

  bool operator==(const RunConfig&) const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string serialize_run_config(const RunConfig& cfg);

/// Base learning rate after the batch-size rule.
double resolved_lr(const RunConfig& cfg);

/// Per-event parameter budget: explicit when set, otherwise
/// (target - base) / number-of-scheduled-events. Returns 0 when growth is
/// effectively disabled (no budget and no target).
std::int64_t resolved_budget(const RunConfig& cfg, std::int64_t base_params);

}  // namespace sprout
