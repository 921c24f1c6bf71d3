// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sprout/tensor.hpp"

namespace sprout {

enum class RoleTag { QKV, PROJ, FC1, FC2, HEAD, EMBED };

const char* role_name(RoleTag role);
RoleTag role_from_name(const std::string& name);

/// DeiT-style transformer dimensions. `fc_reduce` / `attn_reduce` shrink the
/// FC1 and QKV output widths to form bottlenecks; residual width stays
/// `embed_dim` everywhere.
struct ModelConfig {
  int embed_dim = 64;
  int depth = 4;
  int num_heads = 4;
  double mlp_ratio = 4.0;
  int fc_reduce = 2;
  int attn_reduce = 2;
  int patch_size = 7;
  int image_size = 28;
  int num_classes = 10;
  int in_chans = 1;

  void validate() const;
  int tokens() const { return (image_size / patch_size) * (image_size / patch_size) + 1; }
  int qkv_width() const { return 3 * (embed_dim / attn_reduce); }
  int head_dim() const { return (embed_dim / attn_reduce) / num_heads; }
  int mlp_hidden() const { return static_cast<int>(mlp_ratio * embed_dim) / fc_reduce; }

  bool operator==(const ModelConfig&) const = default;
};

/// One growth event's paired +/- neurons for a set of host-layer indices.
/// The four tensors are initialised as exact opposites (bitwise negation) and
/// train freely afterwards.
template <typename T>
struct GrowthBranchT {
  std::vector<int> selected;  // ascending host-neuron indices
  Tensor<T> w_plus, b_plus;
  Tensor<T> w_minus, b_minus;
  int created_at = 0;
  float scaling_factor = 0.2f;
  std::int64_t serial = 0;  // model-wide creation order, for pre/post-event masking
};

template <typename T>
struct GrowableLinearT {
  std::string id;
  RoleTag role = RoleTag::FC1;
  int in_dim = 0;
  int out_dim = 0;
  Tensor<T> weight;  // (out_dim, in_dim)
  Tensor<T> bias;    // (out_dim)
  std::vector<GrowthBranchT<T>> branches;

  /// Base affine plus every branch with serial < serial_limit.
  Tensor<T> forward(const Tensor<T>& x,
                    std::int64_t serial_limit = std::numeric_limits<std::int64_t>::max()) const;

  std::int64_t param_count() const;
};

template <typename T>
struct BlockT {
  Tensor<T> norm1_w, norm1_b, norm2_w, norm2_b;
  GrowableLinearT<T> qkv, proj, fc1, fc2;
};

struct GrowthEvent {
  int epoch = 0;
  std::string layer_id;
  std::vector<int> indices;
  float scaling_factor = 0.2f;
  std::int64_t param_delta = 0;
};

template <typename T>
struct NamedParamT {
  std::string name;
  Tensor<T> tensor;
  bool decay = true;  // weight-decay eligibility
};

struct ForwardOptions {
  std::int64_t branch_serial_limit = std::numeric_limits<std::int64_t>::max();
};

template <typename T>
struct ModelT {
  ModelConfig cfg;
  GrowableLinearT<T> patch_embed;
  Tensor<T> cls_token;  // (1, embed)
  Tensor<T> pos_embed;  // (tokens, embed)
  std::vector<BlockT<T>> blocks;
  Tensor<T> norm_w, norm_b;
  GrowableLinearT<T> head;

  std::vector<GrowthEvent> growth_history;
  std::int64_t next_branch_serial = 0;
  int trained_epochs = 0;

  /// images (B, C, H, W) -> logits (B, num_classes).
  Tensor<T> forward(const Tensor<T>& images, const ForwardOptions& opts = {}) const;

  std::vector<NamedParamT<T>> parameters();
  std::int64_t param_count() const;
  void zero_grad();

  GrowableLinearT<T>& layer(const std::string& id);
  const GrowableLinearT<T>& layer(const std::string& id) const;
  /// QKV, projection, FC1 and FC2 ids, block order.
  std::vector<std::string> growth_eligible_layers() const;
};

using Model = ModelT<float>;

/// Fresh model with DeiT-style initialisation (trunc-normal 0.02 weights,
/// zero biases, unit layernorm gains), deterministic in `seed`.
Model build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Double-precision shadow of a float model (same structure and weights).
ModelT<double> to_double(const Model& m);

/// images (B,C,H,W) -> patch rows (B, patches, C*p*p); plain data movement.
template <typename T>
Tensor<T> patchify(const Tensor<T>& images, const ModelConfig& cfg);

/// Multiply-accumulate count of one forward pass at batch 1, branches
/// included. Matches the convention behind reported transformer "FLOPs".
template <typename T>
std::int64_t flop_estimate(const ModelT<T>& model);

extern template struct GrowableLinearT<float>;
extern template struct GrowableLinearT<double>;
extern template struct ModelT<float>;
extern template struct ModelT<double>;

}  // namespace sprout
