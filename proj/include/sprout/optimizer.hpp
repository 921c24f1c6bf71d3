// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sprout/model.hpp"

namespace sprout {

struct OptimizerConfig {
  double lr = 5e-4;  // base; the harness scales by batch/512 when left at 0 in RunConfig
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip; 0 disables

  bool operator==(const OptimizerConfig&) const = default;
};

/// AdamW with decoupled weight decay. Moment slots are keyed by parameter
/// name, so growing the model extends state without touching existing
/// moments; new parameters join with zero moments at the current step count.
class AdamW {
 public:
  struct Moments {
    std::vector<float> m, v;
  };

  explicit AdamW(OptimizerConfig cfg) : cfg_(cfg) {}

  /// Create zeroed slots for any untracked parameter; existing slots are
  /// left bit-for-bit intact.
  void track(const std::vector<NamedParamT<float>>& params);

  void step(std::vector<NamedParamT<float>>& params, double lr);

  std::int64_t step_count() const { return t_; }
  const Moments* moments(const std::string& name) const {
    const auto it = slots_.find(name);
    return it == slots_.end() ? nullptr : &it->second;
  }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> slots_;
};

/// Cosine decay with linear warmup, in fractional epochs.
double lr_at(double base_lr, double min_lr, int warmup_epochs, int total_epochs, double epoch_progress);

}  // namespace sprout
