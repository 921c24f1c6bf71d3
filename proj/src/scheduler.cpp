// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/scheduler.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace sprout {

void ScheduleConfig::validate() const {
  if (initial_warmup < 0) throw std::invalid_argument("schedule: initial_warmup must be >= 0");
  if (scaling_interval <= 0) throw std::invalid_argument("schedule: scaling_interval must be positive");
  if (layer_threshold <= 0) throw std::invalid_argument("schedule: layer_threshold must be positive");
  if (target_tolerance < 0) throw std::invalid_argument("schedule: target_tolerance must be >= 0");
  if (!(scaling_factor > 0)) throw std::invalid_argument("schedule: scaling_factor must be positive");
}

std::int64_t GrowthPlan::neuron_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += static_cast<std::int64_t>(e.indices.size());
  return n;
}

bool should_scale(int epoch, const ScheduleConfig& cfg, std::int64_t current_params) {
  if (epoch < 0) throw std::invalid_argument("should_scale: negative epoch");
  cfg.validate();
  if (epoch < cfg.initial_warmup) return false;
  if ((epoch - cfg.initial_warmup) % cfg.scaling_interval != 0) return false;
  if (cfg.target_params > 0 && current_params >= cfg.target_params - cfg.target_tolerance) return false;
  return true;
}

std::vector<int> scheduled_epochs(const ScheduleConfig& cfg, int total_epochs) {
  cfg.validate();
  std::vector<int> out;
  for (int e = cfg.initial_warmup; e < total_epochs; e += cfg.scaling_interval) out.push_back(e);
  return out;
}

GrowthPlan build_plan(std::span<const LayerSpectrumInput> spectra, const ScheduleConfig& cfg) {
  cfg.validate();
  if (cfg.parameter_budget <= 0) throw std::invalid_argument("build_plan: parameter_budget not set");

  GrowthPlan plan;
  if (spectra.empty()) return plan;
  plan.event_epoch = spectra.front().spectrum.epoch;
  for (const auto& s : spectra)
    if (s.spectrum.epoch != plan.event_epoch)
      throw std::invalid_argument("build_plan: spectra from mixed epochs");

  struct Candidate {
    double eig;
    std::string layer_id;
    int neuron;
    int in_dim;
  };
  std::vector<Candidate> pool;
  for (const auto& s : spectra) {
    // layer threshold: a layer participates only with enough saddle-eligible neurons
    int eligible = 0;
    for (double v : s.spectrum.min_eigvals)
      if (v < cfg.eligibility_threshold) ++eligible;
    if (eligible < cfg.layer_threshold) continue;
    for (std::size_t i = 0; i < s.spectrum.min_eigvals.size(); ++i) {
      const double v = s.spectrum.min_eigvals[i];
      if (v < cfg.eligibility_threshold)
        pool.push_back({v, s.spectrum.layer_id, static_cast<int>(i), s.in_dim});
    }
  }

  const bool most_negative = cfg.selection == ScheduleConfig::Selection::MostNegative;
  std::sort(pool.begin(), pool.end(), [most_negative](const Candidate& a, const Candidate& b) {
    if (a.eig != b.eig) return most_negative ? a.eig < b.eig : a.eig > b.eig;
    if (a.layer_id != b.layer_id) return a.layer_id < b.layer_id;
    return a.neuron < b.neuron;
  });

  // Longest budget-feasible prefix of the ordered pool.
  std::map<std::string, PlanEntry> entries;
  std::int64_t delta = 0;
  for (const auto& c : pool) {
    const std::int64_t cost = branch_param_delta(1, c.in_dim);
    if (delta + cost > cfg.parameter_budget) break;
    delta += cost;
    auto& e = entries[c.layer_id];
    e.layer_id = c.layer_id;
    e.in_dim = c.in_dim;
    e.indices.push_back(c.neuron);
    e.eigenvalues.push_back(c.eig);
  }
  for (auto& [id, e] : entries) {
    // store ascending by neuron index, eigenvalues kept parallel
    std::vector<std::size_t> order(e.indices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return e.indices[a] < e.indices[b]; });
    PlanEntry sorted;
    sorted.layer_id = e.layer_id;
    sorted.in_dim = e.in_dim;
    for (std::size_t i : order) {
      sorted.indices.push_back(e.indices[i]);
      sorted.eigenvalues.push_back(e.eigenvalues[i]);
    }
    plan.entries.push_back(std::move(sorted));
  }
  plan.projected_param_delta = delta;
  return plan;
}

ApplyResult apply_plan(Model& model, const GrowthPlan& plan, const ScheduleConfig& cfg,
                       const std::vector<TensorF>& probes) {
  cfg.validate();
  // Validate the whole plan before touching the model.
  std::int64_t projected = 0;
  for (const auto& e : plan.entries) {
    const auto& layer = model.layer(e.layer_id);  // throws on unknown id
    if (e.indices.empty()) throw std::invalid_argument("apply_plan: empty entry for " + e.layer_id);
    for (std::size_t i = 0; i < e.indices.size(); ++i) {
      const int idx = e.indices[i];
      if (idx < 0 || idx >= layer.out_dim)
        throw std::invalid_argument("apply_plan: index out of range for " + e.layer_id);
      if (i > 0 && e.indices[i] == e.indices[i - 1])
        throw std::invalid_argument("apply_plan: duplicate index for " + e.layer_id);
    }
    projected += branch_param_delta(static_cast<std::int64_t>(e.indices.size()), layer.in_dim);
  }
  if (projected != plan.projected_param_delta)
    throw std::invalid_argument("apply_plan: projected delta does not match entries");

  ApplyResult res;
  res.serial_cutoff = model.next_branch_serial;
  const std::int64_t before = model.param_count();
  for (const auto& e : plan.entries)
    grow(model.layer(e.layer_id), model, e.indices, static_cast<float>(cfg.scaling_factor),
         plan.event_epoch);
  res.actual_param_delta = model.param_count() - before;
  if (res.actual_param_delta != plan.projected_param_delta)
    throw std::runtime_error("apply_plan: realized delta diverged from projection");
  if (!probes.empty()) res.preservation = verify_function_preservation(model, res.serial_cutoff, probes);
  return res;
}

}  // namespace sprout
