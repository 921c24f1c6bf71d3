// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

namespace sprout {

/// One growth event as surfaced in logs.
struct GrowthEventSummary {
  int epoch = 0;
  std::int64_t projected_param_delta = 0;
  std::int64_t actual_param_delta = 0;
  std::int64_t neurons = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  float preservation_dev_f32 = 0.0f;
  double preservation_dev_f64 = 0.0;
  double min_branch_grad_norm = 0.0;
  double median_negative_eig = 0.0;  // median |negative min-eigenvalue| across analyzed layers
};

struct MetricsRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double eval_top1 = 0.0;
  double eval_top5 = 0.0;
  double eval_loss = 0.0;
  std::int64_t param_count = 0;
  std::int64_t flops_estimate = 0;
  double wall_time_s = 0.0;
  std::optional<GrowthEventSummary> growth_event;
};

nlohmann::json to_json(const MetricsRecord& r);
MetricsRecord metrics_from_json(const nlohmann::json& j);

/// Appends one compact JSON object per line.
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace sprout
