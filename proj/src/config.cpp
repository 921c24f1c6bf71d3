// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sprout {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
}

std::int64_t parse_i64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

std::string roles_to_string(const std::vector<RoleTag>& roles) {
  std::string out;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (i) out += ',';
    out += role_name(roles[i]);
  }
  return out;
}

std::vector<RoleTag> roles_from_string(const std::string& v) {
  std::vector<RoleTag> roles;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) roles.push_back(role_from_name(item));
  }
  if (roles.empty()) throw std::invalid_argument("config: empty role list");
  return roles;
}

const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> s = [] {
    std::map<std::string, Field> f;
    auto add_int = [&](const std::string& key, auto member) {
      f[key] = Field{[key, member](RunConfig& c, const std::string& v) { c.*member = parse_int(key, v); },
                     [member](const RunConfig& c) { return std::to_string(c.*member); }};
    };
    auto add = [&](const std::string& key, auto set, auto get) { f[key] = Field{set, get}; };

    // model
    auto model_int = [&](const std::string& key, int ModelConfig::* member) {
      f[key] = Field{
          [key, member](RunConfig& c, const std::string& v) { c.model.*member = parse_int(key, v); },
          [member](const RunConfig& c) { return std::to_string(c.model.*member); }};
    };
    model_int("model.embed_dim", &ModelConfig::embed_dim);
    model_int("model.depth", &ModelConfig::depth);
    model_int("model.num_heads", &ModelConfig::num_heads);
    model_int("model.fc_reduce", &ModelConfig::fc_reduce);
    model_int("model.attn_reduce", &ModelConfig::attn_reduce);
    model_int("model.patch_size", &ModelConfig::patch_size);
    model_int("model.image_size", &ModelConfig::image_size);
    model_int("model.num_classes", &ModelConfig::num_classes);
    model_int("model.in_chans", &ModelConfig::in_chans);
    add("model.mlp_ratio",
        [](RunConfig& c, const std::string& v) { c.model.mlp_ratio = parse_double("model.mlp_ratio", v); },
        [](const RunConfig& c) { return fmt_double(c.model.mlp_ratio); });

    // schedule
    auto sched_int = [&](const std::string& key, int ScheduleConfig::* member) {
      f[key] = Field{
          [key, member](RunConfig& c, const std::string& v) { c.schedule.*member = parse_int(key, v); },
          [member](const RunConfig& c) { return std::to_string(c.schedule.*member); }};
    };
    sched_int("schedule.initial_warmup", &ScheduleConfig::initial_warmup);
    sched_int("schedule.scaling_interval", &ScheduleConfig::scaling_interval);
    sched_int("schedule.layer_threshold", &ScheduleConfig::layer_threshold);
    add("schedule.parameter_budget",
        [](RunConfig& c, const std::string& v) { c.schedule.parameter_budget = parse_i64("schedule.parameter_budget", v); },
        [](const RunConfig& c) { return std::to_string(c.schedule.parameter_budget); });
    add("schedule.target_params",
        [](RunConfig& c, const std::string& v) { c.schedule.target_params = parse_i64("schedule.target_params", v); },
        [](const RunConfig& c) { return std::to_string(c.schedule.target_params); });
    add("schedule.target_tolerance",
        [](RunConfig& c, const std::string& v) { c.schedule.target_tolerance = parse_i64("schedule.target_tolerance", v); },
        [](const RunConfig& c) { return std::to_string(c.schedule.target_tolerance); });
    add("schedule.scaling_factor",
        [](RunConfig& c, const std::string& v) { c.schedule.scaling_factor = parse_double("schedule.scaling_factor", v); },
        [](const RunConfig& c) { return fmt_double(c.schedule.scaling_factor); });
    add("schedule.eligibility_threshold",
        [](RunConfig& c, const std::string& v) { c.schedule.eligibility_threshold = parse_double("schedule.eligibility_threshold", v); },
        [](const RunConfig& c) { return fmt_double(c.schedule.eligibility_threshold); });
    add("schedule.selection",
        [](RunConfig& c, const std::string& v) {
          if (v == "most_negative") c.schedule.selection = ScheduleConfig::Selection::MostNegative;
          else if (v == "nearest_zero") c.schedule.selection = ScheduleConfig::Selection::NearestZero;
          else throw std::invalid_argument("config: schedule.selection must be most_negative or nearest_zero");
        },
        [](const RunConfig& c) {
          return c.schedule.selection == ScheduleConfig::Selection::MostNegative
                     ? std::string("most_negative")
                     : std::string("nearest_zero");
        });

    // optimizer / lr schedule
    auto opt_double = [&](const std::string& key, double OptimizerConfig::* member) {
      f[key] = Field{
          [key, member](RunConfig& c, const std::string& v) { c.optimizer.*member = parse_double(key, v); },
          [member](const RunConfig& c) { return fmt_double(c.optimizer.*member); }};
    };
    opt_double("optimizer.lr", &OptimizerConfig::lr);
    opt_double("optimizer.weight_decay", &OptimizerConfig::weight_decay);
    opt_double("optimizer.beta1", &OptimizerConfig::beta1);
    opt_double("optimizer.beta2", &OptimizerConfig::beta2);
    opt_double("optimizer.grad_clip", &OptimizerConfig::grad_clip);
    add("lr.min",
        [](RunConfig& c, const std::string& v) { c.lr_min = parse_double("lr.min", v); },
        [](const RunConfig& c) { return fmt_double(c.lr_min); });
    add_int("lr.warmup_epochs", &RunConfig::lr_warmup_epochs);

    // train
    add_int("train.epochs", &RunConfig::epochs);
    add_int("train.batch_size", &RunConfig::batch_size);
    add("train.seed",
        [](RunConfig& c, const std::string& v) { c.seed = parse_u64("train.seed", v); },
        [](const RunConfig& c) { return std::to_string(c.seed); });
    add("train.output_dir",
        [](RunConfig& c, const std::string& v) { c.output_dir = v; },
        [](const RunConfig& c) { return c.output_dir; });

    // dataset
    add("dataset.name",
        [](RunConfig& c, const std::string& v) { c.dataset.name = v; },
        [](const RunConfig& c) { return c.dataset.name; });
    add("dataset.path",
        [](RunConfig& c, const std::string& v) { c.dataset.path = v; },
        [](const RunConfig& c) { return c.dataset.path; });
    auto ds_int = [&](const std::string& key, int DatasetSpec::* member) {
      f[key] = Field{
          [key, member](RunConfig& c, const std::string& v) { c.dataset.*member = parse_int(key, v); },
          [member](const RunConfig& c) { return std::to_string(c.dataset.*member); }};
    };
    ds_int("dataset.classes", &DatasetSpec::classes);
    ds_int("dataset.train_samples", &DatasetSpec::train_samples);
    ds_int("dataset.eval_samples", &DatasetSpec::eval_samples);
    add("dataset.noise",
        [](RunConfig& c, const std::string& v) { c.dataset.noise = parse_double("dataset.noise", v); },
        [](const RunConfig& c) { return fmt_double(c.dataset.noise); });
    add("dataset.hflip",
        [](RunConfig& c, const std::string& v) { c.dataset.hflip = parse_bool("dataset.hflip", v); },
        [](const RunConfig& c) { return c.dataset.hflip ? "true" : "false"; });

    // spectrum estimation
    add_int("spectrum.batches", &RunConfig::spectrum_batches);
    add("spectrum.roles",
        [](RunConfig& c, const std::string& v) { c.spectrum_roles = roles_from_string(v); },
        [](const RunConfig& c) { return roles_to_string(c.spectrum_roles); });
    add("spectrum.analytic_only",
        [](RunConfig& c, const std::string& v) { c.spectrum_analytic_only = parse_bool("spectrum.analytic_only", v); },
        [](const RunConfig& c) { return c.spectrum_analytic_only ? "true" : "false"; });
    return f;
  }();
  return s;
}

}  // namespace

bool RunConfig::operator==(const RunConfig& o) const {
  return serialize_run_config(*this) == serialize_run_config(o);
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = schema().find(key);
    if (it == schema().end())
      throw std::invalid_argument("config: unknown key '" + key + "' (line " + std::to_string(lineno) + ")");
    it->second.set(cfg, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, field] : schema()) out << key << " = " << field.get(cfg) << '\n';
  return out.str();
}

double resolved_lr(const RunConfig& cfg) {
  if (cfg.optimizer.lr > 0) return cfg.optimizer.lr;
  return 5e-4 * static_cast<double>(cfg.batch_size) / 512.0;
}

std::int64_t resolved_budget(const RunConfig& cfg, std::int64_t base_params) {
  if (cfg.schedule.parameter_budget > 0) return cfg.schedule.parameter_budget;
  if (cfg.schedule.target_params <= 0) return 0;
  const auto events = scheduled_epochs(cfg.schedule, cfg.epochs);
  if (events.empty()) return 0;
  const std::int64_t gap = cfg.schedule.target_params - base_params;
  if (gap <= 0) return 0;
  return (gap + static_cast<std::int64_t>(events.size()) - 1) / static_cast<std::int64_t>(events.size());
}

}  // namespace sprout
