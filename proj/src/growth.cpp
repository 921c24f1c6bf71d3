// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/growth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sprout {

template <typename T>
GrowthBranchT<T>& grow(GrowableLinearT<T>& layer, ModelT<T>& model,
                       const std::vector<int>& indices, T scaling_factor, int epoch) {
  if (indices.empty()) throw std::invalid_argument("grow: empty neuron index set");
  if (!(scaling_factor > T(0))) throw std::invalid_argument("grow: scaling factor must be positive");
  std::vector<int> sorted(indices);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= layer.out_dim)
      throw std::invalid_argument("grow: neuron index " + std::to_string(sorted[i]) +
                                  " out of range for layer " + layer.id);
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw std::invalid_argument("grow: duplicate neuron index " + std::to_string(sorted[i]));
  }

  const int k = static_cast<int>(sorted.size());
  const int in = layer.in_dim;
  GrowthBranchT<T> br;
  br.selected = std::move(sorted);
  br.created_at = epoch;
  br.scaling_factor = static_cast<float>(scaling_factor);
  br.serial = model.next_branch_serial++;

  std::vector<T> wp(static_cast<std::size_t>(k) * in), bp(static_cast<std::size_t>(k));
  const auto& W = layer.weight.values();
  const auto& B = layer.bias.values();
  for (int i = 0; i < k; ++i) {
    const int row = br.selected[static_cast<std::size_t>(i)];
    for (int j = 0; j < in; ++j)
      wp[static_cast<std::size_t>(i) * in + j] = scaling_factor * W[static_cast<std::size_t>(row) * in + j];
    bp[static_cast<std::size_t>(i)] = scaling_factor * B[static_cast<std::size_t>(row)];
  }
  // The minus pair is the exact negation, so o+ + o- is exactly zero at
  // initialisation and the network function is unchanged bit for bit.
  std::vector<T> wm(wp.size()), bm(bp.size());
  for (std::size_t i = 0; i < wp.size(); ++i) wm[i] = -wp[i];
  for (std::size_t i = 0; i < bp.size(); ++i) bm[i] = -bp[i];

  br.w_plus = Tensor<T>::from({k, in}, std::move(wp), true);
  br.b_plus = Tensor<T>::from({k}, std::move(bp), true);
  br.w_minus = Tensor<T>::from({k, in}, std::move(wm), true);
  br.b_minus = Tensor<T>::from({k}, std::move(bm), true);

  layer.branches.push_back(std::move(br));

  GrowthEvent ev;
  ev.epoch = epoch;
  ev.layer_id = layer.id;
  ev.indices = layer.branches.back().selected;
  ev.scaling_factor = static_cast<float>(scaling_factor);
  ev.param_delta = branch_param_delta(k, in);
  model.growth_history.push_back(std::move(ev));
  return layer.branches.back();
}

template GrowthBranchT<float>& grow<float>(GrowableLinearT<float>&, ModelT<float>&,
                                           const std::vector<int>&, float, int);
template GrowthBranchT<double>& grow<double>(GrowableLinearT<double>&, ModelT<double>&,
                                             const std::vector<int>&, double, int);

PreservationReport verify_function_preservation(const Model& model, std::int64_t serial_cutoff,
                                                const std::vector<TensorF>& probes,
                                                bool with_f64_shadow) {
  PreservationReport rep;
  NoGradGuard ng;
  for (const auto& probe : probes) {
    const auto before = model.forward(probe, {serial_cutoff});
    const auto after = model.forward(probe);
    for (std::size_t i = 0; i < before.numel(); ++i)
      rep.max_dev_f32 = std::max(rep.max_dev_f32, std::abs(after.values()[i] - before.values()[i]));
  }
  if (with_f64_shadow) {
    const ModelT<double> shadow = to_double(model);
    for (const auto& probe : probes) {
      const TensorD probe64 = cast<double>(probe);
      const auto before = shadow.forward(probe64, {serial_cutoff});
      const auto after = shadow.forward(probe64);
      for (std::size_t i = 0; i < before.numel(); ++i)
        rep.max_dev_f64 = std::max(rep.max_dev_f64, std::abs(after.values()[i] - before.values()[i]));
    }
  }
  return rep;
}

}  // namespace sprout
