// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sprout/checkpoint.hpp"
#include "sprout/config.hpp"
#include "sprout/dataset.hpp"
#include "sprout/growth.hpp"
#include "sprout/metrics.hpp"
#include "sprout/optimizer.hpp"
#include "sprout/ops.hpp"
#include "sprout/rng.hpp"
#include "sprout/train.hpp"

using namespace sprout;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx_fixture(const fs::path& dir, int n_train, int n_eval, int side) {
  auto write_pair = (
      [&](const std::string& img_name, const std::string& lab_name, int n, unsigned seed) {
        std::ofstream img(dir / img_name, std::ios::binary);
        write_be32(img, 0x00000803u);
        write_be32(img, static_cast<std::uint32_t>(n));
        write_be32(img, static_cast<std::uint32_t>(side));
        write_be32(img, static_cast<std::uint32_t>(side));
        std::ofstream lab(dir / lab_name, std::ios::binary);
        write_be32(lab, 0x00000801u);
        write_be32(lab, static_cast<std::uint32_t>(n));
        Rng rng(seed);
        for (int i = 0; i < n; ++i) {
          for (int p = 0; p < side * side; ++p) {
            const unsigned char px = static_cast<unsigned char>(rng.next_below(256));
            img.write(reinterpret_cast<const char*>(&px), 1);
          }
          const unsigned char l = static_cast<unsigned char>(i % 10);
          lab.write(reinterpret_cast<const char*>(&l), 1);
        }
      });
  write_pair("train-images-idx3-ubyte", "train-labels-idx1-ubyte", n_train, 1);
  write_pair("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", n_eval, 2);
}

RunConfig smoke_config(const fs::path& out, int epochs, bool growth) {
  RunConfig cfg;
  cfg.model.embed_dim = 16;
  cfg.model.depth = 2;
  cfg.model.num_heads = 2;
  cfg.model.mlp_ratio = 2.0;
  cfg.model.fc_reduce = 2;
  cfg.model.attn_reduce = 2;
  cfg.model.patch_size = 7;
  cfg.model.image_size = 28;
  cfg.model.num_classes = 10;
  cfg.model.in_chans = 1;
  cfg.dataset.name = "synthetic";
  cfg.dataset.classes = 10;
  cfg.dataset.train_samples = 256;
  cfg.dataset.eval_samples = 64;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.seed = 1234;
  cfg.lr_warmup_epochs = 1;
  cfg.output_dir = out.string();
  cfg.spectrum_batches = 2;
  cfg.schedule.layer_threshold = 2;
  if (growth) {
    cfg.schedule.initial_warmup = 2;
    cfg.schedule.scaling_interval = 2;
    cfg.schedule.target_params = 0;  // explicit per-event budget below
    cfg.schedule.parameter_budget = 600;
  } else {
    cfg.schedule.initial_warmup = epochs + 1;  // never fires
  }
  return cfg;
}

}  // namespace

TEST_CASE("idx loader: header decoded, shapes match, bad magic rejected") {
  const auto dir = temp_dir("sprout_idx");
  write_idx_fixture(dir, 20, 10, 28);
  DatasetSpec spec;
  spec.name = "idx";
  spec.path = dir.string();
  const auto ds = load_dataset(spec, 1);
  CHECK(ds.train_count() == 20);
  CHECK(ds.eval_count() == 10);
  CHECK(ds.height == 28);
  CHECK(ds.channels == 1);
  CHECK(ds.classes == 10);
  CHECK(ds.train_images.size() == static_cast<std::size_t>(20) * 28 * 28);

  // corrupt the magic
  {
    std::ofstream img(dir / "train-images-idx3-ubyte", std::ios::binary);
    write_be32(img, 0xdeadbeefu);
  }
  CHECK_THROWS_AS(load_dataset(spec, 1), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("cifar loader: record arithmetic is exact, bad sizes and labels rejected") {
  const auto dir = temp_dir("sprout_cifar");
  {
    std::ofstream f(dir / "data_batch_1.bin", std::ios::binary);
    Rng rng(3);
    for (int i = 0; i < 7; ++i) {
      const unsigned char label = static_cast<unsigned char>(i % 10);
      f.write(reinterpret_cast<const char*>(&label), 1);
      for (int p = 0; p < 3072; ++p) {
        const unsigned char px = static_cast<unsigned char>(rng.next_below(256));
        f.write(reinterpret_cast<const char*>(&px), 1);
      }
    }
  }
  DatasetSpec spec;
  spec.name = "cifar";
  spec.path = dir.string();
  spec.classes = 10;
  const auto ds = load_dataset(spec, 1);
  CHECK(ds.train_count() + ds.eval_count() == 7);
  CHECK(ds.channels == 3);
  CHECK(ds.height == 32);

  // size not a multiple of 3073
  {
    std::ofstream f(dir / "data_batch_1.bin", std::ios::binary | std::ios::app);
    f.put(0);
  }
  CHECK_THROWS_AS(load_dataset(spec, 1), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("synthetic dataset is bitwise deterministic in (spec, seed)") {
  DatasetSpec spec;
  spec.name = "synthetic";
  spec.train_samples = 64;
  spec.eval_samples = 16;
  const auto a = load_dataset(spec, 7);
  const auto b = load_dataset(spec, 7);
  CHECK(a.train_images == b.train_images);
  CHECK(a.train_labels == b.train_labels);
  CHECK(a.eval_images == b.eval_images);
  const auto c = load_dataset(spec, 8);
  CHECK(a.train_images != c.train_images);
}

TEST_CASE("epoch order: deterministic permutation per (seed, epoch)") {
  const auto a = epoch_order(100, 5, 3);
  const auto b = epoch_order(100, 5, 3);
  CHECK(a == b);
  const auto c = epoch_order(100, 5, 4);
  CHECK(a != c);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("run config: serialize/parse round-trip is lossless; unknown keys rejected") {
  RunConfig cfg;
  cfg.model.embed_dim = 48;
  cfg.schedule.target_params = 123456;
  cfg.optimizer.lr = 0.000735;
  cfg.seed = 987654321;
  cfg.output_dir = "runs/some dir";
  cfg.spectrum_roles = {RoleTag::FC1, RoleTag::QKV};
  const std::string text = serialize_run_config(cfg);
  const RunConfig back = parse_run_config(text);
  CHECK(back == cfg);
  CHECK(serialize_run_config(back) == text);

  CHECK_THROWS_AS(parse_run_config("nonsense.key = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config("model.embed_dim = twelve\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config("model.embed_dim 12\n"), std::invalid_argument);
  // comments and blank lines are fine
  const RunConfig c2 = parse_run_config("# comment\n\nmodel.embed_dim = 32 # tail\n");
  CHECK(c2.model.embed_dim == 32);
}

TEST_CASE("resolved lr and budget rules") {
  RunConfig cfg;
  cfg.batch_size = 512;
  cfg.optimizer.lr = 0;
  CHECK(resolved_lr(cfg) == doctest::Approx(5e-4));
  cfg.batch_size = 64;
  CHECK(resolved_lr(cfg) == doctest::Approx(5e-4 / 8));
  cfg.optimizer.lr = 0.001;
  CHECK(resolved_lr(cfg) == doctest::Approx(0.001));

  cfg.epochs = 60;
  cfg.schedule.initial_warmup = 20;
  cfg.schedule.scaling_interval = 10;
  cfg.schedule.target_params = 210000;
  CHECK(resolved_budget(cfg, 105000) == (105000 + 3) / 4);
  cfg.schedule.parameter_budget = 777;
  CHECK(resolved_budget(cfg, 105000) == 777);
}

TEST_CASE("adamw: tracking new params never perturbs existing moments") {
  auto m = build_model(ModelConfig{}, 101);
  auto params = m.parameters();
  AdamW opt(OptimizerConfig{});
  opt.track(params);

  Rng rng(102);
  std::vector<float> img(static_cast<std::size_t>(4) * 28 * 28);
  for (auto& v : img) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  auto images = TensorF::from({4, 1, 28, 28}, img);
  std::vector<int> labels{0, 1, 2, 3};

  m.zero_grad();
  backward(ops::cross_entropy_mean(m.forward(images), labels));
  opt.step(params, 1e-3);
  const auto snapshot_m = opt.moments("blocks.0.mlp.fc1.weight")->m;
  const auto snapshot_v = opt.moments("blocks.0.mlp.fc1.weight")->v;

  grow(m.layer("blocks.0.mlp.fc1"), m, {0, 1}, 0.2f, 1);
  params = m.parameters();
  opt.track(params);
  CHECK(opt.moments("blocks.0.mlp.fc1.weight")->m == snapshot_m);
  CHECK(opt.moments("blocks.0.mlp.fc1.weight")->v == snapshot_v);
  const auto* fresh = opt.moments("blocks.0.mlp.fc1.br0.w_plus");
  REQUIRE(fresh != nullptr);
  for (float v : fresh->m) CHECK(v == 0.0f);
  for (float v : fresh->v) CHECK(v == 0.0f);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("lr schedule: linear warmup into cosine decay") {
  CHECK(lr_at(1.0, 0.0, 5, 100, 0.0) == doctest::Approx(0.0));
  CHECK(lr_at(1.0, 0.0, 5, 100, 2.5) == doctest::Approx(0.5));
  CHECK(lr_at(1.0, 0.0, 5, 100, 5.0) == doctest::Approx(1.0));
  CHECK(lr_at(1.0, 0.0, 5, 100, 52.5) == doctest::Approx(0.5));
  CHECK(lr_at(1.0, 0.1, 5, 100, 100.0) == doctest::Approx(0.1));
}

TEST_CASE("checkpoint round-trip preserves weights, config, and growth history") {
  auto m = build_model(ModelConfig{}, 103);
  grow(m.layer("blocks.0.mlp.fc1"), m, {1, 4, 7}, 0.2f, 9);
  grow(m.layer("blocks.2.attn.qkv"), m, {0, 5}, 0.25f, 12);
  m.trained_epochs = 13;
  // scramble a branch so the file is not just the init state
  for (auto& v : m.layer("blocks.0.mlp.fc1").branches[0].w_plus.mutable_values()) v += 0.01f;

  const auto dir = temp_dir("sprout_ckpt");
  const auto path = dir / "model.bin";
  save_checkpoint(m, path);
  auto loaded = load_checkpoint(path);

  CHECK(loaded.cfg == m.cfg);
  CHECK(loaded.trained_epochs == 13);
  REQUIRE(loaded.growth_history.size() == 2);
  CHECK(loaded.growth_history[1].layer_id == "blocks.2.attn.qkv");
  CHECK(loaded.growth_history[1].indices == std::vector<int>{0, 5});
  CHECK(loaded.param_count() == m.param_count());

  auto pa = m.parameters();
  auto pb = loaded.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].tensor.values() == pb[i].tensor.values());
  }

  Rng rng(104);
  std::vector<float> img(static_cast<std::size_t>(2) * 28 * 28);
  for (auto& v : img) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  auto images = TensorF::from({2, 1, 28, 28}, img);
  NoGradGuard ng;
  CHECK(m.forward(images).values() == loaded.forward(images).values());

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("two-epoch smoke run: metrics well-formed, reload reproduces eval loss") {
  const auto dir = temp_dir("sprout_smoke");
  const auto cfg = smoke_config(dir, 2, false);
  const auto res = train(cfg);

  CHECK(res.iterations == 2 * (256 / 32));
  CHECK(res.growth_events == 0);
  REQUIRE(res.metrics.size() == 2);
  for (const auto& r : res.metrics) {
    CHECK(r.eval_top1 <= r.eval_top5);
    CHECK(r.param_count == res.metrics.front().param_count);
  }
  CHECK(fs::exists(res.metrics_path));
  CHECK(fs::exists(res.checkpoint_path));

  // checkpoint reload reproduces the recorded eval loss
  auto model = load_checkpoint(res.checkpoint_path);
  const auto ds = load_dataset(cfg.dataset, cfg.seed);
  const auto ev = evaluate(model, ds, cfg.batch_size);
  CHECK(std::abs(ev.loss - res.metrics.back().eval_loss) <= 1e-6);
  fs::remove_all(dir);
}

TEST_CASE("reproducibility: identical config and seed give identical metrics (wall time aside)") {
  const auto dir1 = temp_dir("sprout_rep1");
  const auto dir2 = temp_dir("sprout_rep2");
  auto c1 = smoke_config(dir1, 2, false);
  auto c2 = smoke_config(dir2, 2, false);
  const auto r1 = train(c1);
  const auto r2 = train(c2);
  REQUIRE(r1.metrics.size() == r2.metrics.size());
  for (std::size_t i = 0; i < r1.metrics.size(); ++i) {
    auto ja = to_json(r1.metrics[i]);
    auto jb = to_json(r2.metrics[i]);
    ja.erase("wall_time_s");
    jb.erase("wall_time_s");
    CHECK(ja == jb);
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("growth run: events fire, loss is continuous, gradients flow, params only grow") {
  const auto dir = temp_dir("sprout_growth_run");
  const auto cfg = smoke_config(dir, 6, true);
  const auto res = train(cfg);

  CHECK(res.iterations == 6 * (256 / 32));  // growth adds no iterations
  CHECK(res.growth_events >= 1);
  std::int64_t prev = 0;
  bool saw_event = false;
  for (const auto& r : res.metrics) {
    CHECK(r.param_count >= prev);
    prev = r.param_count;
    if (r.growth_event) {
      saw_event = true;
      const auto& g = *r.growth_event;
      CHECK(std::abs(g.loss_after - g.loss_before) <= 1e-4);
      CHECK(g.preservation_dev_f32 <= 1e-5f);
      CHECK(g.preservation_dev_f64 <= 1e-12);
      if (g.actual_param_delta > 0) CHECK(g.min_branch_grad_norm > 1e-8);
      CHECK(g.actual_param_delta <= cfg.schedule.parameter_budget);
    }
  }
  CHECK(saw_event);
  CHECK(res.final_params > res.metrics.front().param_count);
  CHECK(fs::exists(res.plan_log_path));

  // plan log is valid JSONL
  std::ifstream in(res.plan_log_path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("cumulative_params"));
    ++lines;
  }
  CHECK(lines >= res.growth_events);
  fs::remove_all(dir);
}

TEST_CASE("train rejects mismatched dataset/model geometry") {
  const auto dir = temp_dir("sprout_mismatch");
  auto cfg = smoke_config(dir, 1, false);
  cfg.model.num_classes = 7;  // synthetic set yields 10
  CHECK_THROWS_AS(train(cfg), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("random horizontal flip mirrors rows in place, deterministically per rng stream") {
  Dataset ds;
  ds.channels = 1;
  ds.height = 2;
  ds.width = 4;
  ds.classes = 2;
  ds.train_images = {1, 2, 3, 4, 5, 6, 7, 8,   9, 10, 11, 12, 13, 14, 15, 16};
  ds.train_labels = {0, 1};
  ds.eval_images = ds.train_images;
  ds.eval_labels = ds.train_labels;
  const std::vector<int> idx{0, 1};
  auto b1 = make_batch(ds, idx);
  auto b2 = make_batch(ds, idx);
  Rng r1(5), r2(5);
  random_hflip(b1, 2, 4, 1, r1);
  random_hflip(b2, 2, 4, 1, r2);
  CHECK(b1.images.values() == b2.images.values());
  // every row is either intact or exactly reversed
  for (int s = 0; s < 2; ++s)
    for (int y = 0; y < 2; ++y) {
      const float* orig = ds.train_images.data() + static_cast<std::size_t>(s) * 8 + y * 4;
      const float* row = b1.images.values().data() + static_cast<std::size_t>(s) * 8 + y * 4;
      const bool same = std::equal(row, row + 4, orig);
      const bool flipped = row[0] == orig[3] && row[1] == orig[2] && row[2] == orig[1] && row[3] == orig[0];
      CHECK((same || flipped));
    }
}
