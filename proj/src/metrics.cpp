// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/metrics.hpp"

#include <fstream>

namespace sprout {

nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j{
      {"epoch", r.epoch},
      {"train_loss", r.train_loss},
      {"eval_top1", r.eval_top1},
      {"eval_top5", r.eval_top5},
      {"eval_loss", r.eval_loss},
      {"param_count", r.param_count},
      {"flops_estimate", r.flops_estimate},
      {"wall_time_s", r.wall_time_s},
  };
  if (r.growth_event) {
    const auto& g = *r.growth_event;
    j["growth_event"] = nlohmann::json{
        {"epoch", g.epoch},
        {"projected_param_delta", g.projected_param_delta},
        {"actual_param_delta", g.actual_param_delta},
        {"neurons", g.neurons},
        {"loss_before", g.loss_before},
        {"loss_after", g.loss_after},
        {"preservation_dev_f32", g.preservation_dev_f32},
        {"preservation_dev_f64", g.preservation_dev_f64},
        {"min_branch_grad_norm", g.min_branch_grad_norm},
        {"median_negative_eig", g.median_negative_eig},
    };
  }
  return j;
}

MetricsRecord metrics_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.train_loss = j.at("train_loss").get<double>();
  r.eval_top1 = j.at("eval_top1").get<double>();
  r.eval_top5 = j.at("eval_top5").get<double>();
  r.eval_loss = j.at("eval_loss").get<double>();
  r.param_count = j.at("param_count").get<std::int64_t>();
  r.flops_estimate = j.at("flops_estimate").get<std::int64_t>();
  r.wall_time_s = j.at("wall_time_s").get<double>();
  if (j.contains("growth_event")) {
    const auto& g = j.at("growth_event");
    GrowthEventSummary s;
    s.epoch = g.at("epoch").get<int>();
    s.projected_param_delta = g.at("projected_param_delta").get<std::int64_t>();
    s.actual_param_delta = g.at("actual_param_delta").get<std::int64_t>();
    s.neurons = g.at("neurons").get<std::int64_t>();
    s.loss_before = g.at("loss_before").get<double>();
    s.loss_after = g.at("loss_after").get<double>();
    s.preservation_dev_f32 = g.at("preservation_dev_f32").get<float>();
    s.preservation_dev_f64 = g.at("preservation_dev_f64").get<double>();
    s.min_branch_grad_norm = g.at("min_branch_grad_norm").get<double>();
    s.median_negative_eig = g.at("median_negative_eig").get<double>();
    r.growth_event = s;
  }
  return r;
}

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("metrics: cannot open " + path.string());
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("metrics: write failed for " + path.string());
}

}  // namespace sprout
