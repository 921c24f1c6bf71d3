// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "sprout/growth.hpp"
#include "sprout/model.hpp"
#include "sprout/ops.hpp"
#include "sprout/rng.hpp"

using namespace sprout;
namespace O = sprout::ops;

namespace {

ModelConfig deit_s(int fc_reduce, int attn_reduce) {
  ModelConfig c;
  c.embed_dim = 384;
  c.depth = 12;
  c.num_heads = 6;
  c.mlp_ratio = 4.0;
  c.fc_reduce = fc_reduce;
  c.attn_reduce = attn_reduce;
  c.patch_size = 16;
  c.image_size = 224;
  c.num_classes = 100;
  c.in_chans = 3;
  return c;
}

ModelConfig desk_config() {
  return ModelConfig{};  // defaults are the desk-scale model
}

TensorF random_images(Rng& rng, int batch, const ModelConfig& cfg) {
  std::vector<float> v(static_cast<std::size_t>(batch) * cfg.in_chans * cfg.image_size * cfg.image_size);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return TensorF::from({batch, cfg.in_chans, cfg.image_size, cfg.image_size}, std::move(v));
}

// Closed-form parameter count from layer shapes alone.
std::int64_t closed_form_params(const ModelConfig& c) {
  const std::int64_t D = c.embed_dim;
  const std::int64_t T = c.tokens();
  const std::int64_t qkv_out = c.qkv_width();
  const std::int64_t hidden = c.mlp_hidden();
  const std::int64_t patch_row = static_cast<std::int64_t>(c.in_chans) * c.patch_size * c.patch_size;
  std::int64_t n = patch_row * D + D;       // patch embed
  n += D;                                   // cls
  n += T * D;                               // pos
  const std::int64_t blk = 2 * D + (D * qkv_out + qkv_out) + ((D / c.attn_reduce) * D + D) +
                           2 * D + (D * hidden + hidden) + (hidden * D + D);
  n += c.depth * blk;
  n += 2 * D;                               // final norm
  n += D * c.num_classes + c.num_classes;   // head
  return n;
}

}  // namespace

TEST_CASE("parameter accounting: DeiT-S 21.7M unreduced, 11.0M at /2 /2") {
  auto m1 = build_model(deit_s(1, 1), 1);
  CHECK(std::abs(m1.param_count() - 21'700'000.0) / 21'700'000.0 <= 0.01);
  auto m2 = build_model(deit_s(2, 2), 1);
  CHECK(std::abs(m2.param_count() - 11'000'000.0) / 11'000'000.0 <= 0.02);
}

TEST_CASE("flop estimate: 4.6G unreduced, 2.3G reduced (mult-add count)") {
  auto m1 = build_model(deit_s(1, 1), 1);
  CHECK(std::abs(flop_estimate(m1) - 4.6e9) / 4.6e9 <= 0.05);
  auto m2 = build_model(deit_s(2, 2), 1);
  CHECK(std::abs(flop_estimate(m2) - 2.3e9) / 2.3e9 <= 0.05);
}

TEST_CASE("desk model parameter count equals the closed-form constant") {
  auto m = build_model(desk_config(), 7);
  CHECK(m.param_count() == 105'866);
  CHECK(m.param_count() == closed_form_params(desk_config()));
}

TEST_CASE("config validation rejects divisibility violations") {
  ModelConfig c = desk_config();
  c.num_heads = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = desk_config();
  c.fc_reduce = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = desk_config();
  c.attn_reduce = 4;
  c.num_heads = 4;  // 64/4 = 16, 16 % 4 == 0: fine
  c.validate();
  c.num_heads = 16;  // wait: embed 64 % 16 == 0, 16 % 16 == 0
  c.validate();
  c.embed_dim = 60;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = desk_config();
  c.image_size = 30;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("zero-weight head produces all-zero logits") {
  auto m = build_model(desk_config(), 3);
  std::fill(m.head.weight.mutable_values().begin(), m.head.weight.mutable_values().end(), 0.0f);
  std::fill(m.head.bias.mutable_values().begin(), m.head.bias.mutable_values().end(), 0.0f);
  Rng rng(5);
  NoGradGuard ng;
  auto logits = m.forward(random_images(rng, 3, m.cfg));
  for (float v : logits.values()) CHECK(v == 0.0f);
}

TEST_CASE("permuting the batch permutes the logits identically") {
  auto m = build_model(desk_config(), 4);
  Rng rng(6);
  auto imgs = random_images(rng, 4, m.cfg);
  NoGradGuard ng;
  auto logits = m.forward(imgs);

  // reversed batch
  const auto& iv = imgs.values();
  const std::size_t stride = iv.size() / 4;
  std::vector<float> rev(iv.size());
  for (int b = 0; b < 4; ++b)
    std::copy(iv.begin() + b * stride, iv.begin() + (b + 1) * stride,
              rev.begin() + (3 - b) * stride);
  auto logits_rev = m.forward(TensorF::from(imgs.shape(), std::move(rev)));
  const std::size_t K = static_cast<std::size_t>(m.cfg.num_classes);
  for (int b = 0; b < 4; ++b)
    for (std::size_t j = 0; j < K; ++j)
      CHECK(logits.values()[b * K + j] == logits_rev.values()[(3 - b) * K + j]);
}

TEST_CASE("forward determinism: identical weights and inputs give bitwise-identical logits") {
  auto m = build_model(desk_config(), 8);
  Rng rng(9);
  auto imgs = random_images(rng, 2, m.cfg);
  NoGradGuard ng;
  auto a = m.forward(imgs);
  auto b = m.forward(imgs);
  CHECK(a.values() == b.values());
}

TEST_CASE("residual width stays embed_dim for any reduce divisors") {
  for (int fr : {1, 2, 4}) {
    for (int ar : {1, 2, 4}) {
      ModelConfig c = desk_config();
      c.fc_reduce = fr;
      c.attn_reduce = ar;
      auto m = build_model(c, 11);
      Rng rng(12);
      NoGradGuard ng;
      auto logits = m.forward(random_images(rng, 2, c));
      CHECK(logits.shape() == std::vector<int>{2, c.num_classes});
    }
  }
}

TEST_CASE("gradient reaches every trainable tensor, including fresh branches") {
  auto m = build_model(desk_config(), 13);
  grow(m.layer("blocks.1.mlp.fc1"), m, {0, 3, 9}, 0.2f, 0);
  grow(m.layer("blocks.0.attn.qkv"), m, {5, 17}, 0.2f, 0);
  Rng rng(14);
  auto imgs = random_images(rng, 4, m.cfg);
  std::vector<int> labels{1, 4, 0, 7};
  auto loss = O::cross_entropy_mean(m.forward(imgs), labels);
  backward(loss);
  for (auto& p : m.parameters()) {
    REQUIRE(p.tensor.has_grad());
    double nrm = 0;
    for (float g : p.tensor.grad()) nrm += static_cast<double>(g) * g;
    CHECK_MESSAGE(std::sqrt(nrm) > 0.0, p.name);
  }
}

TEST_CASE("branch parameter delta is exactly 2k(d+1)") {
  auto m = build_model(desk_config(), 15);
  auto& fc1 = m.layer("blocks.2.mlp.fc1");
  const auto before = m.param_count();
  grow(fc1, m, {1, 2, 3, 5, 8, 13, 21, 34}, 0.2f, 4);
  CHECK(m.param_count() - before == 2 * 8 * (fc1.in_dim + 1));
  CHECK(m.param_count() - before == branch_param_delta(8, fc1.in_dim));
}

TEST_CASE("forward rejects mismatched image shapes") {
  auto m = build_model(desk_config(), 16);
  auto bad = TensorF::zeros({2, 1, 14, 14});
  CHECK_THROWS_AS(m.forward(bad), std::invalid_argument);
}

// Independent transcript: a from-scratch double-precision evaluation of a
// 2-token, embed-4, 1-block model with fixed weights.
TEST_CASE("forward matches a hand-coded matrix-calculator transcript") {
  ModelConfig c;
  c.embed_dim = 4;
  c.depth = 1;
  c.num_heads = 2;
  c.mlp_ratio = 2.0;
  c.fc_reduce = 1;
  c.attn_reduce = 1;
  c.patch_size = 8;
  c.image_size = 8;
  c.num_classes = 3;
  c.in_chans = 1;
  auto m = build_model(c, 1);

  // Deterministic weights: every parameter p_i <- 0.3 sin(0.7 + 1.3 i), per tensor.
  for (auto& p : m.parameters()) {
    auto& v = p.tensor.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = static_cast<float>(0.3 * std::sin(0.7 + 1.3 * static_cast<double>(i)));
  }
  std::vector<float> img(64);
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = static_cast<float>(0.5 * std::cos(0.2 + 0.11 * static_cast<double>(i)));

  NoGradGuard ng;
  auto logits = m.forward(TensorF::from({1, 1, 8, 8}, img));

  // ---- transcript, plain double loops ----
  const int D = 4, H = 2, dh = 2, T = 2, hidden = 8;
  auto W = [&](const TensorF& t, int r, int cdim, int cc) {
    return static_cast<double>(t.values()[static_cast<std::size_t>(r) * cdim + cc]);
  };
  auto Vv = [&](const TensorF& t, int i) { return static_cast<double>(t.values()[static_cast<std::size_t>(i)]); };
  auto ln = [&](std::vector<double>& tok, const TensorF& g, const TensorF& b) {
    double mu = 0, var = 0;
    for (double x : tok) mu += x;
    mu /= D;
    for (double x : tok) var += (x - mu) * (x - mu);
    var /= D;
    std::vector<double> out(D);
    for (int i = 0; i < D; ++i)
      out[i] = Vv(g, i) * ((tok[i] - mu) / std::sqrt(var + 1e-6)) + Vv(b, i);
    return out;
  };
  auto gelu_d = [](double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); };

  // patch row: c, then py, then px (one 8x8 patch = the image)
  std::vector<double> patch(64);
  for (int i = 0; i < 64; ++i) patch[i] = img[static_cast<std::size_t>(i)];
  std::vector<std::vector<double>> tok(T, std::vector<double>(D, 0.0));
  for (int i = 0; i < D; ++i) {
    double z = Vv(m.patch_embed.bias, i);
    for (int j = 0; j < 64; ++j) z += W(m.patch_embed.weight, i, 64, j) * patch[j];
    tok[1][static_cast<std::size_t>(i)] = z;
    tok[0][static_cast<std::size_t>(i)] = static_cast<double>(m.cls_token.values()[static_cast<std::size_t>(i)]);
  }
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < D; ++i) tok[t][static_cast<std::size_t>(i)] += W(m.pos_embed, t, D, i);

  const auto& blk = m.blocks[0];
  // attention
  std::vector<std::vector<double>> qkv(T, std::vector<double>(3 * D));
  for (int t = 0; t < T; ++t) {
    auto h = ln(tok[static_cast<std::size_t>(t)], blk.norm1_w, blk.norm1_b);
    for (int i = 0; i < 3 * D; ++i) {
      double z = Vv(blk.qkv.bias, i);
      for (int j = 0; j < D; ++j) z += W(blk.qkv.weight, i, D, j) * h[static_cast<std::size_t>(j)];
      qkv[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = z;
    }
  }
  std::vector<std::vector<double>> merged(T, std::vector<double>(D, 0.0));
  for (int h = 0; h < H; ++h) {
    // scores over tokens
    std::vector<std::vector<double>> attn(T, std::vector<double>(T));
    for (int ti = 0; ti < T; ++ti) {
      std::vector<double> row(T);
      double mx = -1e300;
      for (int tj = 0; tj < T; ++tj) {
        double s = 0;
        for (int d = 0; d < dh; ++d) {
          const double q = qkv[static_cast<std::size_t>(ti)][static_cast<std::size_t>(h * dh + d)];
          const double k = qkv[static_cast<std::size_t>(tj)][static_cast<std::size_t>(D + h * dh + d)];
          s += (q / std::sqrt(static_cast<double>(dh))) * k;
        }
        row[static_cast<std::size_t>(tj)] = s;
        mx = std::max(mx, s);
      }
      double denom = 0;
      for (int tj = 0; tj < T; ++tj) denom += std::exp(row[static_cast<std::size_t>(tj)] - mx);
      for (int tj = 0; tj < T; ++tj)
        attn[static_cast<std::size_t>(ti)][static_cast<std::size_t>(tj)] =
            std::exp(row[static_cast<std::size_t>(tj)] - mx) / denom;
    }
    for (int ti = 0; ti < T; ++ti)
      for (int d = 0; d < dh; ++d) {
        double s = 0;
        for (int tj = 0; tj < T; ++tj)
          s += attn[static_cast<std::size_t>(ti)][static_cast<std::size_t>(tj)] *
               qkv[static_cast<std::size_t>(tj)][static_cast<std::size_t>(2 * D + h * dh + d)];
        merged[static_cast<std::size_t>(ti)][static_cast<std::size_t>(h * dh + d)] = s;
      }
  }
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < D; ++i) {
      double z = Vv(blk.proj.bias, i);
      for (int j = 0; j < D; ++j)
        z += W(blk.proj.weight, i, D, j) * merged[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
      tok[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] += z;
    }
  // mlp
  for (int t = 0; t < T; ++t) {
    auto h2 = ln(tok[static_cast<std::size_t>(t)], blk.norm2_w, blk.norm2_b);
    std::vector<double> mid(hidden);
    for (int i = 0; i < hidden; ++i) {
      double z = Vv(blk.fc1.bias, i);
      for (int j = 0; j < D; ++j) z += W(blk.fc1.weight, i, D, j) * h2[static_cast<std::size_t>(j)];
      mid[static_cast<std::size_t>(i)] = gelu_d(z);
    }
    for (int i = 0; i < D; ++i) {
      double z = Vv(blk.fc2.bias, i);
      for (int j = 0; j < hidden; ++j) z += W(blk.fc2.weight, i, hidden, j) * mid[static_cast<std::size_t>(j)];
      tok[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] += z;
    }
  }
  auto fin = ln(tok[0], m.norm_w, m.norm_b);
  for (int i = 0; i < 3; ++i) {
    double z = Vv(m.head.bias, i);
    for (int j = 0; j < D; ++j) z += W(m.head.weight, i, D, j) * fin[static_cast<std::size_t>(j)];
    CHECK(std::abs(static_cast<double>(logits.values()[static_cast<std::size_t>(i)]) - z) <= 1e-5);
  }
}
