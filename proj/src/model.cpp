// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/model.hpp"

#include <cmath>
#include <stdexcept>

#include "sprout/ops.hpp"
#include "sprout/rng.hpp"
#include "sprout/shared_input_cache.hpp"

namespace sprout {

const char* role_name(RoleTag role) {
  switch (role) {
    case RoleTag::QKV: return "qkv";
    case RoleTag::PROJ: return "proj";
    case RoleTag::FC1: return "fc1";
    case RoleTag::FC2: return "fc2";
    case RoleTag::HEAD: return "head";
    case RoleTag::EMBED: return "embed";
  }
  return "?";
}

RoleTag role_from_name(const std::string& name) {
  if (name == "qkv") return RoleTag::QKV;
  if (name == "proj") return RoleTag::PROJ;
  if (name == "fc1") return RoleTag::FC1;
  if (name == "fc2") return RoleTag::FC2;
  if (name == "head") return RoleTag::HEAD;
  if (name == "embed") return RoleTag::EMBED;
  throw std::invalid_argument("unknown layer role: " + name);
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (embed_dim <= 0 || depth <= 0 || num_heads <= 0 || patch_size <= 0 || image_size <= 0 ||
      num_classes <= 0 || in_chans <= 0 || mlp_ratio <= 0)
    fail("dimensions must be positive");
  if (fc_reduce != 1 && fc_reduce != 2 && fc_reduce != 4) fail("fc_reduce must be 1, 2 or 4");
  if (attn_reduce != 1 && attn_reduce != 2 && attn_reduce != 4) fail("attn_reduce must be 1, 2 or 4");
  if (embed_dim % num_heads != 0) fail("embed_dim not divisible by num_heads");
  if (embed_dim % attn_reduce != 0) fail("embed_dim not divisible by attn_reduce");
  if ((embed_dim / attn_reduce) % num_heads != 0)
    fail("reduced QKV width not divisible by num_heads");
  const double hidden = mlp_ratio * embed_dim;
  if (hidden != std::floor(hidden)) fail("mlp_ratio * embed_dim must be integral");
  if (static_cast<int>(hidden) % fc_reduce != 0) fail("mlp hidden width not divisible by fc_reduce");
  if (image_size % patch_size != 0) fail("image_size not divisible by patch_size");
}

// ---------------------------------------------------------------------------
// GrowableLinear
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> GrowableLinearT<T>::forward(const Tensor<T>& x, std::int64_t serial_limit) const {
  Tensor<T> y = ops::linear(x, weight, bias);
  for (const auto& br : branches) {
    if (br.serial >= serial_limit) continue;
    // Branch path: out[s] += gelu(o+ + o-) + o+ + o-. The pair is
    // an exact +/- mirror at creation so the sum starts at exactly zero.
    Tensor<T> op = ops::linear(x, br.w_plus, br.b_plus);
    Tensor<T> om = ops::linear(x, br.w_minus, br.b_minus);
    Tensor<T> s = ops::add(op, om);
    Tensor<T> t = ops::add(ops::gelu(s), s);
    y = ops::scatter_add_cols(y, t, br.selected);
  }
  return y;
}

template <typename T>
std::int64_t GrowableLinearT<T>::param_count() const {
  std::int64_t n = static_cast<std::int64_t>(weight.numel()) + static_cast<std::int64_t>(bias.numel());
  for (const auto& br : branches)
    n += 2 * static_cast<std::int64_t>(br.w_plus.numel() + br.b_plus.numel());
  return n;
}

// ---------------------------------------------------------------------------
// Model forward
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> patchify(const Tensor<T>& images, const ModelConfig& cfg) {
  if (images.rank() != 4 || images.dim(1) != cfg.in_chans || images.dim(2) != cfg.image_size ||
      images.dim(3) != cfg.image_size)
    throw std::invalid_argument("patchify: images " + shape_str(images.shape()) +
                                " do not match configured input " +
                                shape_str({-1, cfg.in_chans, cfg.image_size, cfg.image_size}));
  const int B = images.dim(0);
  const int p = cfg.patch_size;
  const int grid = cfg.image_size / p;
  const int P = grid * grid;
  const int row = cfg.in_chans * p * p;
  std::vector<T> out(static_cast<std::size_t>(B) * P * row);
  const T* src = images.values().data();
  const std::size_t chan_stride = static_cast<std::size_t>(cfg.image_size) * cfg.image_size;
  const std::size_t img_stride = chan_stride * cfg.in_chans;
  for (int b = 0; b < B; ++b) {
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        T* dst = out.data() + ((static_cast<std::size_t>(b) * P) + gy * grid + gx) * row;
        for (int c = 0; c < cfg.in_chans; ++c)
          for (int py = 0; py < p; ++py)
            for (int px = 0; px < p; ++px)
              *dst++ = src[b * img_stride + c * chan_stride +
                           static_cast<std::size_t>(gy * p + py) * cfg.image_size + gx * p + px];
      }
    }
  }
  return Tensor<T>::from({B, P, row}, std::move(out));
}

template <typename T>
Tensor<T> ModelT<T>::forward(const Tensor<T>& images, const ForwardOptions& opts) const {
  using namespace ops;
  cfg.validate();
  const std::int64_t lim = opts.branch_serial_limit;
  const int B = images.dim(0);
  const int H = cfg.num_heads;
  const int dh = cfg.head_dim();
  const int Dq = cfg.embed_dim / cfg.attn_reduce;
  const int Tk = cfg.tokens();

  ForwardContext<T>* ctx = current_context<T>();
  auto trace = [&](const std::string& id, const Tensor<T>& in, const Tensor<T>& preact) {
    if (ctx && ctx->trace_want.count(id)) {
      ctx->traces[id].input = in;
      ctx->traces[id].preact = preact;
    }
  };

  Tensor<T> x = patch_embed.forward(patchify(images, cfg), lim);        // (B, P, D)
  x = concat_axis1(expand_leading(cls_token, B), x);                    // (B, T, D)
  x = add_broadcast(x, pos_embed);

  for (const auto& blk : blocks) {
    // attention
    Tensor<T> h = layernorm(x, blk.norm1_w, blk.norm1_b);
    Tensor<T> qkv = blk.qkv.forward(h, lim);                            // (B, T, 3*Dq)
    trace(blk.qkv.id, h, qkv);
    qkv = permute(reshape(qkv, {B, Tk, 3, H, dh}), {2, 0, 3, 1, 4});    // (3, B, H, T, dh)
    Tensor<T> q = slice_axis0(qkv, 0);
    Tensor<T> k = slice_axis0(qkv, 1);
    Tensor<T> v = slice_axis0(qkv, 2);
    q = scale(q, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    Tensor<T> attn = softmax_lastdim(matmul(q, permute(k, {0, 1, 3, 2})));
    Tensor<T> mixed = reshape(permute(matmul(attn, v), {0, 2, 1, 3}), {B, Tk, Dq});
    Tensor<T> po = blk.proj.forward(mixed, lim);
    trace(blk.proj.id, mixed, po);
    x = add(x, po);

    // mlp
    Tensor<T> h2 = layernorm(x, blk.norm2_w, blk.norm2_b);
    Tensor<T> f1 = blk.fc1.forward(h2, lim);
    Tensor<T> act = gelu(f1);
    if (ctx && ctx->trace_want.count(blk.fc1.id)) {
      ctx->traces[blk.fc1.id].input = h2;
      ctx->traces[blk.fc1.id].preact = f1;
      ctx->traces[blk.fc1.id].act = act;
    }
    Tensor<T> f2 = blk.fc2.forward(act, lim);
    trace(blk.fc2.id, act, f2);
    x = add(x, f2);
  }

  x = layernorm(x, norm_w, norm_b);
  Tensor<T> cls = select_axis1(x, 0);  // (B, D)
  Tensor<T> logits = head.forward(cls, lim);
  trace(head.id, cls, logits);
  return logits;
}

// ---------------------------------------------------------------------------
// Parameter plumbing
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void push_layer_params(std::vector<NamedParamT<T>>& out, GrowableLinearT<T>& l) {
  out.push_back({l.id + ".weight", l.weight, true});
  out.push_back({l.id + ".bias", l.bias, false});
  for (std::size_t i = 0; i < l.branches.size(); ++i) {
    auto& br = l.branches[i];
    const std::string stem = l.id + ".br" + std::to_string(i);
    out.push_back({stem + ".w_plus", br.w_plus, true});
    out.push_back({stem + ".b_plus", br.b_plus, false});
    out.push_back({stem + ".w_minus", br.w_minus, true});
    out.push_back({stem + ".b_minus", br.b_minus, false});
  }
}

}  // namespace

template <typename T>
std::vector<NamedParamT<T>> ModelT<T>::parameters() {
  std::vector<NamedParamT<T>> out;
  push_layer_params(out, patch_embed);
  out.push_back({"cls_token", cls_token, false});
  out.push_back({"pos_embed", pos_embed, false});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& blk = blocks[i];
    const std::string stem = "blocks." + std::to_string(i);
    out.push_back({stem + ".norm1.weight", blk.norm1_w, false});
    out.push_back({stem + ".norm1.bias", blk.norm1_b, false});
    push_layer_params(out, blk.qkv);
    push_layer_params(out, blk.proj);
    out.push_back({stem + ".norm2.weight", blk.norm2_w, false});
    out.push_back({stem + ".norm2.bias", blk.norm2_b, false});
    push_layer_params(out, blk.fc1);
    push_layer_params(out, blk.fc2);
  }
  out.push_back({"norm.weight", norm_w, false});
  out.push_back({"norm.bias", norm_b, false});
  push_layer_params(out, head);
  return out;
}

template <typename T>
std::int64_t ModelT<T>::param_count() const {
  std::int64_t n = patch_embed.param_count();
  n += static_cast<std::int64_t>(cls_token.numel() + pos_embed.numel());
  for (const auto& blk : blocks) {
    n += static_cast<std::int64_t>(blk.norm1_w.numel() + blk.norm1_b.numel() + blk.norm2_w.numel() +
                                   blk.norm2_b.numel());
    n += blk.qkv.param_count() + blk.proj.param_count() + blk.fc1.param_count() + blk.fc2.param_count();
  }
  n += static_cast<std::int64_t>(norm_w.numel() + norm_b.numel());
  n += head.param_count();
  return n;
}

template <typename T>
void ModelT<T>::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

template <typename T>
GrowableLinearT<T>& ModelT<T>::layer(const std::string& id) {
  return const_cast<GrowableLinearT<T>&>(static_cast<const ModelT<T>*>(this)->layer(id));
}

template <typename T>
const GrowableLinearT<T>& ModelT<T>::layer(const std::string& id) const {
  if (id == patch_embed.id) return patch_embed;
  if (id == head.id) return head;
  for (const auto& blk : blocks) {
    if (id == blk.qkv.id) return blk.qkv;
    if (id == blk.proj.id) return blk.proj;
    if (id == blk.fc1.id) return blk.fc1;
    if (id == blk.fc2.id) return blk.fc2;
  }
  throw std::invalid_argument("no such layer: " + id);
}

template <typename T>
std::vector<std::string> ModelT<T>::growth_eligible_layers() const {
  std::vector<std::string> ids;
  for (const auto& blk : blocks) {
    ids.push_back(blk.qkv.id);
    ids.push_back(blk.proj.id);
    ids.push_back(blk.fc1.id);
    ids.push_back(blk.fc2.id);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace {

TensorF trunc_normal_tensor(std::vector<int> shape, Rng& rng, double stddev) {
  auto t = TensorF::zeros(std::move(shape), true);
  for (auto& v : t.mutable_values()) v = static_cast<float>(rng.trunc_normal(stddev));
  return t;
}

GrowableLinearT<float> make_linear(std::string id, RoleTag role, int in_dim, int out_dim, Rng& rng) {
  GrowableLinearT<float> l;
  l.id = std::move(id);
  l.role = role;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.weight = trunc_normal_tensor({out_dim, in_dim}, rng, 0.02);
  l.bias = TensorF::zeros({out_dim}, true);
  return l;
}

}  // namespace

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  Rng rng = Rng(seed).fork(0x6d6f64656cULL);

  const int D = cfg.embed_dim;
  const int Tk = cfg.tokens();
  const int row = cfg.in_chans * cfg.patch_size * cfg.patch_size;

  m.patch_embed = make_linear("patch_embed", RoleTag::EMBED, row, D, rng);
  m.cls_token = trunc_normal_tensor({1, D}, rng, 0.02);
  m.pos_embed = trunc_normal_tensor({Tk, D}, rng, 0.02);

  m.blocks.resize(static_cast<std::size_t>(cfg.depth));
  for (int i = 0; i < cfg.depth; ++i) {
    auto& blk = m.blocks[static_cast<std::size_t>(i)];
    const std::string stem = "blocks." + std::to_string(i);
    blk.norm1_w = TensorF::full({D}, 1.0f, true);
    blk.norm1_b = TensorF::zeros({D}, true);
    blk.norm2_w = TensorF::full({D}, 1.0f, true);
    blk.norm2_b = TensorF::zeros({D}, true);
    blk.qkv = make_linear(stem + ".attn.qkv", RoleTag::QKV, D, cfg.qkv_width(), rng);
    blk.proj = make_linear(stem + ".attn.proj", RoleTag::PROJ, D / cfg.attn_reduce, D, rng);
    blk.fc1 = make_linear(stem + ".mlp.fc1", RoleTag::FC1, D, cfg.mlp_hidden(), rng);
    blk.fc2 = make_linear(stem + ".mlp.fc2", RoleTag::FC2, cfg.mlp_hidden(), D, rng);
  }
  m.norm_w = TensorF::full({D}, 1.0f, true);
  m.norm_b = TensorF::zeros({D}, true);
  m.head = make_linear("head", RoleTag::HEAD, D, cfg.num_classes, rng);
  return m;
}

namespace {

template <typename To, typename From>
GrowableLinearT<To> cast_layer(const GrowableLinearT<From>& l) {
  GrowableLinearT<To> out;
  out.id = l.id;
  out.role = l.role;
  out.in_dim = l.in_dim;
  out.out_dim = l.out_dim;
  out.weight = cast<To>(l.weight);
  out.bias = cast<To>(l.bias);
  for (const auto& br : l.branches) {
    GrowthBranchT<To> nb;
    nb.selected = br.selected;
    nb.w_plus = cast<To>(br.w_plus);
    nb.b_plus = cast<To>(br.b_plus);
    nb.w_minus = cast<To>(br.w_minus);
    nb.b_minus = cast<To>(br.b_minus);
    nb.created_at = br.created_at;
    nb.scaling_factor = br.scaling_factor;
    nb.serial = br.serial;
    out.branches.push_back(std::move(nb));
  }
  return out;
}

}  // namespace

ModelT<double> to_double(const Model& m) {
  ModelT<double> out;
  out.cfg = m.cfg;
  out.patch_embed = cast_layer<double>(m.patch_embed);
  out.cls_token = cast<double>(m.cls_token);
  out.pos_embed = cast<double>(m.pos_embed);
  for (const auto& blk : m.blocks) {
    BlockT<double> nb;
    nb.norm1_w = cast<double>(blk.norm1_w);
    nb.norm1_b = cast<double>(blk.norm1_b);
    nb.norm2_w = cast<double>(blk.norm2_w);
    nb.norm2_b = cast<double>(blk.norm2_b);
    nb.qkv = cast_layer<double>(blk.qkv);
    nb.proj = cast_layer<double>(blk.proj);
    nb.fc1 = cast_layer<double>(blk.fc1);
    nb.fc2 = cast_layer<double>(blk.fc2);
    out.blocks.push_back(std::move(nb));
  }
  out.norm_w = cast<double>(m.norm_w);
  out.norm_b = cast<double>(m.norm_b);
  out.head = cast_layer<double>(m.head);
  out.growth_history = m.growth_history;
  out.next_branch_serial = m.next_branch_serial;
  out.trained_epochs = m.trained_epochs;
  return out;
}

template <typename T>
std::int64_t flop_estimate(const ModelT<T>& model) {
  const ModelConfig& cfg = model.cfg;
  const int Tk = cfg.tokens();
  const int P = Tk - 1;
  auto layer_macs = [](const GrowableLinearT<T>& l, std::int64_t rows) {
    std::int64_t macs = rows * l.in_dim * l.out_dim;
    for (const auto& br : l.branches)
      macs += rows * 2 * static_cast<std::int64_t>(br.selected.size()) * l.in_dim;
    return macs;
  };
  std::int64_t macs = layer_macs(model.patch_embed, P);
  for (const auto& blk : model.blocks) {
    macs += layer_macs(blk.qkv, Tk);
    macs += 2LL * cfg.num_heads * Tk * Tk * cfg.head_dim();  // scores + context
    macs += layer_macs(blk.proj, Tk);
    macs += layer_macs(blk.fc1, Tk);
    macs += layer_macs(blk.fc2, Tk);
  }
  macs += layer_macs(model.head, 1);
  return macs;
}

template std::int64_t flop_estimate<float>(const ModelT<float>&);
template std::int64_t flop_estimate<double>(const ModelT<double>&);
template Tensor<float> patchify<float>(const Tensor<float>&, const ModelConfig&);
template Tensor<double> patchify<double>(const Tensor<double>&, const ModelConfig&);
template struct GrowableLinearT<float>;
template struct GrowableLinearT<double>;
template struct ModelT<float>;
template struct ModelT<double>;

}  // namespace sprout
