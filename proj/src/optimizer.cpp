// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sprout {

void AdamW::track(const std::vector<NamedParamT<float>>& params) {
  for (const auto& p : params) {
    auto it = slots_.find(p.name);
    if (it == slots_.end()) {
      Moments mom;
      mom.m.assign(p.tensor.numel(), 0.0f);
      mom.v.assign(p.tensor.numel(), 0.0f);
      slots_.emplace(p.name, std::move(mom));
    } else if (it->second.m.size() != p.tensor.numel()) {
      throw std::runtime_error("optimizer: tracked size changed for " + p.name);
    }
  }
}

void AdamW::step(std::vector<NamedParamT<float>>& params, double lr) {
  ++t_;
  double clip_scale = 1.0;
  if (cfg_.grad_clip > 0) {
    double sq = 0;
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (float g : p.tensor.grad()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
  }

  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    auto it = slots_.find(p.name);
    if (it == slots_.end()) throw std::runtime_error("optimizer: parameter not tracked: " + p.name);
    auto& mom = it->second;
    auto& values = p.tensor.mutable_values();
    const auto& grad = p.tensor.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = static_cast<double>(grad[i]) * clip_scale;
      const double m = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g;
      const double v = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g * g;
      mom.m[i] = static_cast<float>(m);
      mom.v[i] = static_cast<float>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      double upd = lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      if (p.decay) upd += lr * cfg_.weight_decay * static_cast<double>(values[i]);
      values[i] = static_cast<float>(values[i] - upd);
    }
  }
}

double lr_at(double base_lr, double min_lr, int warmup_epochs, int total_epochs, double epoch_progress) {
  if (warmup_epochs > 0 && epoch_progress < warmup_epochs)
    return base_lr * (epoch_progress / warmup_epochs);
  const double span = std::max(1e-9, static_cast<double>(total_epochs - warmup_epochs));
  const double t = std::clamp((epoch_progress - warmup_epochs) / span, 0.0, 1.0);
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace sprout
