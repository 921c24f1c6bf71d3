// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: train / eval / spectra / plan / count.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sprout/checkpoint.hpp"
#include "sprout/config.hpp"
#include "sprout/dataset.hpp"
#include "sprout/hessian.hpp"
#include "sprout/scheduler.hpp"
#include "sprout/simd.hpp"
#include "sprout/train.hpp"

namespace fs = std::filesystem;
using namespace sprout;

namespace {

struct GlobalOverrides {
  std::int64_t seed = -1;
  std::string output_dir;
  int device_threads = 0;
};

void apply_overrides(RunConfig& cfg, const GlobalOverrides& g) {
  if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
  if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
}

double as_millions(std::int64_t v) { return static_cast<double>(v) / 1e6; }
double as_giga(std::int64_t v) { return static_cast<double>(v) / 1e9; }

int cmd_train(const std::string& config_path, const GlobalOverrides& g) {
  RunConfig cfg = load_run_config(config_path);
  apply_overrides(cfg, g);
  const TrainResult res = train(cfg);
  std::printf("trained %d epochs, %d growth events, final params %lld (%.3f M)\n",
              cfg.epochs, res.growth_events, static_cast<long long>(res.final_params),
              as_millions(res.final_params));
  if (!res.metrics.empty()) {
    const auto& last = res.metrics.back();
    std::printf("final top-1 %.4f  top-5 %.4f  eval loss %.6f\n", last.eval_top1, last.eval_top5,
                last.eval_loss);
  }
  std::printf("checkpoint: %s\nmetrics: %s\n", res.checkpoint_path.string().c_str(),
              res.metrics_path.string().c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_config,
             const GlobalOverrides& g) {
  RunConfig cfg = load_run_config(dataset_config);
  apply_overrides(cfg, g);
  Model model = load_checkpoint(checkpoint_path);
  const Dataset ds = load_dataset(cfg.dataset, cfg.seed);
  const EvalResult ev = evaluate(model, ds, cfg.batch_size);
  std::printf("samples %d  top-1 %.4f  top-5 %.4f  loss %.6f\n", ds.eval_count(), ev.top1, ev.top5,
              ev.loss);
  return 0;
}

int cmd_spectra(const std::string& checkpoint_path, const std::string& dataset_config,
                const std::vector<std::string>& layers, int batches, const GlobalOverrides& g) {
  RunConfig cfg = load_run_config(dataset_config);
  apply_overrides(cfg, g);
  Model model = load_checkpoint(checkpoint_path);
  const Dataset ds = load_dataset(cfg.dataset, cfg.seed);

  std::vector<std::string> wanted = layers;
  if (wanted.empty()) {
    for (const auto& id : model.growth_eligible_layers())
      if (model.layer(id).role == RoleTag::FC1) wanted.push_back(id);
  }

  const auto order = epoch_order(ds.train_count(), cfg.seed, model.trained_epochs);
  const int bpe = ds.train_count() / cfg.batch_size;
  if (batches > bpe) throw std::invalid_argument("spectra: not enough data for requested batches");
  std::vector<LabeledBatch> est;
  for (int b = bpe - batches; b < bpe; ++b)
    est.push_back(make_batch(ds, std::span<const int>(order).subspan(
                                     static_cast<std::size_t>(b) * cfg.batch_size,
                                     static_cast<std::size_t>(cfg.batch_size))));

  SpectrumOptions opts;
  opts.max_batches = batches;
  opts.analytic_only = cfg.spectrum_analytic_only;
  opts.epoch = model.trained_epochs;
  std::vector<SplittingSpectrum> spectra;
  for (const auto& id : wanted) {
    std::printf("analyzing %s (%d neurons)...\n", id.c_str(), model.layer(id).out_dim);
    spectra.push_back(layer_spectrum(model, id, est, opts));
  }
  const auto files = export_spectrum(spectra, fs::path(cfg.output_dir) / "spectra");
  for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
  return 0;
}

int cmd_plan(const std::string& config_path, const std::vector<std::string>& spectra_files,
             const GlobalOverrides& g) {
  RunConfig cfg = load_run_config(config_path);
  apply_overrides(cfg, g);
  Model model = build_model(cfg.model, cfg.seed);

  std::vector<LayerSpectrumInput> inputs;
  for (const auto& f : spectra_files) {
    LayerSpectrumInput in;
    in.spectrum = import_spectrum_csv(f);
    in.in_dim = model.layer(in.spectrum.layer_id).in_dim;
    inputs.push_back(std::move(in));
  }
  ScheduleConfig sched = cfg.schedule;
  if (sched.parameter_budget <= 0) sched.parameter_budget = resolved_budget(cfg, model.param_count());
  if (sched.parameter_budget <= 0)
    throw std::invalid_argument("plan: set schedule.parameter_budget or schedule.target_params");

  const GrowthPlan plan = build_plan(inputs, sched);
  nlohmann::json j{{"event_epoch", plan.event_epoch},
                   {"projected_param_delta", plan.projected_param_delta},
                   {"neurons", plan.neuron_count()},
                   {"parameter_budget", sched.parameter_budget},
                   {"entries", nlohmann::json::array()}};
  for (const auto& e : plan.entries)
    j["entries"].push_back({{"layer", e.layer_id},
                            {"in_dim", e.in_dim},
                            {"indices", e.indices},
                            {"eigenvalues", e.eigenvalues}});
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int cmd_count(const std::string& config_path) {
  const RunConfig cfg = load_run_config(config_path);
  Model model = build_model(cfg.model, cfg.seed);
  const auto params = model.param_count();
  const auto macs = flop_estimate(model);
  std::printf("%-22s %14s %12s\n", "model", "params", "flops");
  std::printf("%-22s %10.3f M %9.3f G\n",
              ("embed" + std::to_string(cfg.model.embed_dim) + "/d" + std::to_string(cfg.model.depth) +
               " fc/" + std::to_string(cfg.model.fc_reduce) + " attn/" + std::to_string(cfg.model.attn_reduce))
                  .c_str(),
              as_millions(params), as_giga(macs));
  std::printf("exact: %lld params, %lld mult-adds per image\n", static_cast<long long>(params),
              static_cast<long long>(macs));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"training-aware non-uniform transformer growth"};
  app.require_subcommand(1);

  GlobalOverrides g;
  app.add_option("--seed", g.seed, "override train.seed");
  app.add_option("--output-dir", g.output_dir, "override train.output_dir");
  app.add_option("--device-threads", g.device_threads, "worker threads for kernels and spectra");

  std::string config_path, checkpoint_path, dataset_config;
  std::vector<std::string> layers, spectra_files;
  int batches = 4;
  bool dry_run = false;

  auto* train_cmd = app.add_subcommand("train", "train per config, growing on schedule");
  train_cmd->fallthrough();
  train_cmd->add_option("config", config_path, "run config file")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->fallthrough();
  eval_cmd->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("dataset", dataset_config, "config file providing dataset.* keys")->required();

  auto* spectra_cmd = app.add_subcommand("spectra", "export per-neuron eigenvalue spectra");
  spectra_cmd->fallthrough();
  spectra_cmd->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
  spectra_cmd->add_option("dataset", dataset_config, "config file providing dataset.* keys")->required();
  spectra_cmd->add_option("--layers", layers, "layer ids (default: every FC1)")->delimiter(',');
  spectra_cmd->add_option("--batches", batches, "estimation batches (default 4)");

  auto* plan_cmd = app.add_subcommand("plan", "build a growth plan from exported spectra");
  plan_cmd->fallthrough();
  plan_cmd->add_option("config", config_path, "run config file")->required();
  plan_cmd->add_option("--spectra", spectra_files, "spectrum CSV files")->required()->delimiter(',');
  plan_cmd->add_flag("--dry-run", dry_run, "print the plan without applying (always on)");

  auto* count_cmd = app.add_subcommand("count", "parameter and FLOP accounting for a config");
  count_cmd->fallthrough();
  count_cmd->add_option("config", config_path, "run config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints usage or error
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  if (g.device_threads > 0) simd::set_threads(g.device_threads);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, g);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, dataset_config, g);
    if (spectra_cmd->parsed()) return cmd_spectra(checkpoint_path, dataset_config, layers, batches, g);
    if (plan_cmd->parsed()) return cmd_plan(config_path, spectra_files, g);
    if (count_cmd->parsed()) return cmd_count(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
