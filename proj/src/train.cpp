// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "sprout/checkpoint.hpp"
#include "sprout/growth.hpp"
#include "sprout/hessian.hpp"
#include "sprout/ops.hpp"
#include "sprout/optimizer.hpp"
#include "sprout/scheduler.hpp"
#include "sprout/shared_input_cache.hpp"

namespace sprout {

namespace {

namespace fs = std::filesystem;

double batch_loss_eval(const Model& model, const LabeledBatch& batch) {
  NoGradGuard ng;
  return ops::cross_entropy_mean(model.forward(batch.images), batch.labels).item();
}

// rank of the true label among the logits, ties broken by class index
int label_rank(const float* logits, int classes, int label) {
  int rank = 0;
  const float ly = logits[label];
  for (int j = 0; j < classes; ++j) {
    if (j == label) continue;
    if (logits[j] > ly || (logits[j] == ly && j < label)) ++rank;
  }
  return rank;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

EvalResult evaluate(const Model& model, const Dataset& ds, int batch_size) {
  EvalResult res;
  const int n = ds.eval_count();
  if (n == 0) return res;
  const int classes = ds.classes;
  std::int64_t hit1 = 0, hit5 = 0;
  double loss_sum = 0.0;
  NoGradGuard ng;
  for (int start = 0; start < n; start += batch_size) {
    const int count = std::min(batch_size, n - start);
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = start + i;
    const auto batch = make_batch(ds, idx, true);
    const auto logits = model.forward(batch.images);
    loss_sum += ops::cross_entropy_mean(logits, batch.labels).item() * count;
    for (int i = 0; i < count; ++i) {
      const int rank = label_rank(logits.values().data() + static_cast<std::size_t>(i) * classes,
                                  classes, batch.labels[static_cast<std::size_t>(i)]);
      if (rank == 0) ++hit1;
      if (rank < 5) ++hit5;
    }
  }
  res.loss = loss_sum / n;
  res.top1 = static_cast<double>(hit1) / n;
  res.top5 = static_cast<double>(hit5) / n;
  return res;
}

TrainResult train(const RunConfig& cfg) {
  cfg.model.validate();
  cfg.schedule.validate();
  const Dataset ds = load_dataset(cfg.dataset, cfg.seed);
  if (ds.channels != cfg.model.in_chans || ds.height != cfg.model.image_size ||
      ds.width != cfg.model.image_size)
    throw std::invalid_argument("train: dataset geometry does not match model config");
  if (ds.classes != cfg.model.num_classes)
    throw std::invalid_argument("train: dataset classes do not match model config");

  Model model = build_model(cfg.model, cfg.seed);
  auto params = model.parameters();
  AdamW opt(cfg.optimizer);
  opt.track(params);

  const double base_lr = resolved_lr(cfg);
  ScheduleConfig sched = cfg.schedule;
  sched.parameter_budget = resolved_budget(cfg, model.param_count());
  const bool growth_on = sched.parameter_budget > 0;

  const int bpe = ds.train_count() / cfg.batch_size;
  if (bpe < 1) throw std::invalid_argument("train: fewer train samples than one batch");
  if (growth_on && cfg.spectrum_batches > bpe)
    throw std::invalid_argument("train: spectrum_batches exceeds batches per epoch");

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  TrainResult result;
  result.metrics_path = out_dir / "metrics.jsonl";
  result.plan_log_path = out_dir / "plan_log.jsonl";
  result.checkpoint_path = out_dir / "checkpoint.bin";
  std::error_code ec;
  fs::remove(result.metrics_path, ec);
  fs::remove(result.plan_log_path, ec);

  {
    std::ofstream cfg_out(out_dir / "run_config.cfg");
    cfg_out << serialize_run_config(cfg);
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = epoch_order(ds.train_count(), cfg.seed, epoch);
    std::optional<GrowthEventSummary> event;

    if (growth_on && should_scale(epoch, sched, model.param_count())) {
      // Hold the tail batches of this epoch's order aside for estimation
      // (evaluation mode; they are still trained on below).
      std::vector<LabeledBatch> est;
      for (int b = bpe - cfg.spectrum_batches; b < bpe; ++b)
        est.push_back(make_batch(
            ds, std::span<const int>(order).subspan(static_cast<std::size_t>(b) * cfg.batch_size,
                                                    static_cast<std::size_t>(cfg.batch_size))));

      GrowthEventSummary summary;
      summary.epoch = epoch;
      double loss_before = 0;
      for (const auto& b : est) loss_before += batch_loss_eval(model, b);
      summary.loss_before = loss_before / static_cast<double>(est.size());

      SpectrumOptions sopts;
      sopts.max_batches = cfg.spectrum_batches;
      sopts.analytic_only = cfg.spectrum_analytic_only;
      sopts.epoch = epoch;
      std::vector<SplittingSpectrum> spectra;
      std::vector<LayerSpectrumInput> inputs;
      for (const auto& id : model.growth_eligible_layers()) {
        const auto& layer = model.layer(id);
        if (std::find(cfg.spectrum_roles.begin(), cfg.spectrum_roles.end(), layer.role) ==
            cfg.spectrum_roles.end())
          continue;
        auto spec = layer_spectrum(model, id, est, sopts);
        inputs.push_back({spec, layer.in_dim});
        spectra.push_back(std::move(spec));
      }
      if (!spectra.empty()) export_spectrum(spectra, out_dir / "spectra");

      std::vector<double> neg_pool;
      for (const auto& s : spectra)
        for (double v : s.min_eigvals)
          if (v < 0) neg_pool.push_back(-v);
      summary.median_negative_eig = median(std::move(neg_pool));
      result.event_negative_medians.emplace_back(epoch, summary.median_negative_eig);

      const GrowthPlan plan = build_plan(inputs, sched);
      nlohmann::json plan_json{{"epoch", epoch},
                               {"projected_param_delta", plan.projected_param_delta},
                               {"entries", nlohmann::json::array()},
                               {"median_negative_eig", summary.median_negative_eig}};
      for (const auto& e : plan.entries)
        plan_json["entries"].push_back(
            {{"layer", e.layer_id}, {"indices", e.indices}, {"eigenvalues", e.eigenvalues}});

      if (!plan.empty()) {
        std::vector<TensorF> probes;
        for (const auto& b : est) probes.push_back(b.images);
        const ApplyResult applied = apply_plan(model, plan, sched, probes);
        if (applied.preservation.max_dev_f32 > 1e-5f) {
          // diagnostic dump, then hard abort: growth must not change the function
          std::ofstream dump(out_dir / "growth_violation.json");
          plan_json["preservation_dev_f32"] = applied.preservation.max_dev_f32;
          plan_json["preservation_dev_f64"] = applied.preservation.max_dev_f64;
          dump << plan_json.dump(2);
          throw std::runtime_error("growth verification failed: function deviation " +
                                   std::to_string(applied.preservation.max_dev_f32));
        }
        ++result.growth_events;
        summary.projected_param_delta = plan.projected_param_delta;
        summary.actual_param_delta = applied.actual_param_delta;
        summary.neurons = plan.neuron_count();
        summary.preservation_dev_f32 = applied.preservation.max_dev_f32;
        summary.preservation_dev_f64 = applied.preservation.max_dev_f64;

        double loss_after = 0;
        for (const auto& b : est) loss_after += batch_loss_eval(model, b);
        summary.loss_after = loss_after / static_cast<double>(est.size());

        // gradient-flow probe on the freshly added branches (no update)
        model.zero_grad();
        backward(ops::cross_entropy_mean(model.forward(est.front().images), est.front().labels));
        double min_norm = std::numeric_limits<double>::infinity();
        for (const auto& id : model.growth_eligible_layers()) {
          for (const auto& br : model.layer(id).branches) {
            if (br.serial < applied.serial_cutoff) continue;
            for (const auto* t : {&br.w_plus, &br.w_minus}) {
              double sq = 0;
              for (float g : t->grad()) sq += static_cast<double>(g) * g;
              min_norm = std::min(min_norm, std::sqrt(sq));
            }
          }
        }
        model.zero_grad();
        summary.min_branch_grad_norm = std::isfinite(min_norm) ? min_norm : 0.0;

        params = model.parameters();
        opt.track(params);  // zero-moment join at the current step count

        plan_json["actual_param_delta"] = applied.actual_param_delta;
        plan_json["loss_before"] = summary.loss_before;
        plan_json["loss_after"] = summary.loss_after;
        plan_json["preservation_dev_f32"] = summary.preservation_dev_f32;
        plan_json["preservation_dev_f64"] = summary.preservation_dev_f64;
        plan_json["min_branch_grad_norm"] = summary.min_branch_grad_norm;
      } else {
        summary.loss_after = summary.loss_before;
      }
      plan_json["cumulative_params"] = model.param_count();
      append_jsonl(result.plan_log_path, plan_json);
      event = summary;
    }

    // training pass over every batch of the epoch
    double loss_sum = 0;
    Rng aug_rng = Rng(cfg.seed).fork(0xf11b0000ULL + static_cast<std::uint64_t>(epoch));
    for (int b = 0; b < bpe; ++b) {
      auto batch = make_batch(
          ds, std::span<const int>(order).subspan(static_cast<std::size_t>(b) * cfg.batch_size,
                                                  static_cast<std::size_t>(cfg.batch_size)));
      if (cfg.dataset.hflip) random_hflip(batch, ds.height, ds.width, ds.channels, aug_rng);
      const double lr = lr_at(base_lr, cfg.lr_min, cfg.lr_warmup_epochs, cfg.epochs,
                              epoch + static_cast<double>(b) / bpe);
      model.zero_grad();
      {
        ForwardContext<float> ctx;
        ContextGuard<float> guard(ctx);
        auto loss = ops::cross_entropy_mean(model.forward(batch.images), batch.labels);
        loss_sum += loss.item();
        backward(loss);
      }
      opt.step(params, lr);
      ++result.iterations;
    }

    const EvalResult ev = evaluate(model, ds, cfg.batch_size);
    model.trained_epochs = epoch + 1;

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / bpe;
    rec.eval_top1 = ev.top1;
    rec.eval_top5 = ev.top5;
    rec.eval_loss = ev.loss;
    rec.param_count = model.param_count();
    rec.flops_estimate = flop_estimate(model);
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.growth_event = event;
    append_jsonl(result.metrics_path, to_json(rec));
    result.metrics.push_back(std::move(rec));
  }

  save_checkpoint(model, result.checkpoint_path);
  result.final_params = model.param_count();

  if (result.event_negative_medians.size() >= 2) {
    const double first = result.event_negative_medians.front().second;
    const double last = result.event_negative_medians.back().second;
    const bool pass = first > 0 && last <= 0.5 * first;
    nlohmann::json report{{"first_event_epoch", result.event_negative_medians.front().first},
                          {"first_median", first},
                          {"last_event_epoch", result.event_negative_medians.back().first},
                          {"last_median", last},
                          {"ratio", first > 0 ? last / first : 0.0},
                          {"halved", pass}};
    std::ofstream out(out_dir / "saddle_shrinkage.json");
    out << report.dump(2) << '\n';
    if (!pass) {
      std::ofstream warn(out_dir / "saddle_shrinkage_warning.txt");
      warn << "median negative-eigenvalue magnitude did not halve between the first and last "
              "scaling events (ratio "
           << (first > 0 ? last / first : 0.0) << ")\n";
    }
  }
  return result;
}

}  // namespace sprout
