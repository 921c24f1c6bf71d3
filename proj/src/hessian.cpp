// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/hessian.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "sprout/gelu_math.hpp"
#include "sprout/hvp.hpp"
#include "sprout/kernels.hpp"
#include "sprout/ops.hpp"
#include "sprout/shared_input_cache.hpp"
#include "sprout/simd.hpp"

namespace sprout {

namespace {

void check_batches(std::span<const LabeledBatch> batches, int max_batches) {
  if (max_batches < 1) throw std::invalid_argument("spectrum: max_batches must be >= 1");
  if (static_cast<std::size_t>(max_batches) > batches.size())
    throw std::invalid_argument("spectrum: requested " + std::to_string(max_batches) +
                                " batches but only " + std::to_string(batches.size()) + " available");
}

bool gelu_fronted(RoleTag role) { return role == RoleTag::FC1; }

}  // namespace

GeluLayerTraces collect_gelu_traces(Model& model, std::span<const LabeledBatch> batches,
                                    const std::string& layer_id, int max_batches) {
  check_batches(batches, max_batches);
  const auto& layer = model.layer(layer_id);
  if (!gelu_fronted(layer.role))
    throw std::invalid_argument("collect_gelu_traces: layer " + layer_id + " is not GeLU-fronted");

  GeluLayerTraces tr;
  tr.in_dim = layer.in_dim;
  tr.out_dim = layer.out_dim;
  tr.batch_count = max_batches;
  const double gscale = 1.0 / max_batches;

  for (int b = 0; b < max_batches; ++b) {
    ForwardContext<float> ctx;
    ctx.trace_want.insert(layer_id);
    ContextGuard<float> guard(ctx);
    const auto& batch = batches[static_cast<std::size_t>(b)];
    auto loss = ops::cross_entropy_mean(model.forward(batch.images), batch.labels);
    backward(loss);

    const auto& t = ctx.traces.at(layer_id);
    if (!t.act.defined() || !t.act.has_grad())
      throw std::runtime_error("collect_gelu_traces: no activation gradient recorded");
    const std::size_t rows = t.input.numel() / static_cast<std::size_t>(tr.in_dim);
    const auto& xv = t.input.values();
    const auto& zv = t.preact.values();
    const auto& gv = t.act.grad();
    tr.x.reserve(tr.x.size() + xv.size());
    for (float v : xv) tr.x.push_back(static_cast<double>(v));
    for (float v : zv) tr.z.push_back(static_cast<double>(v));
    for (float v : gv) tr.g.push_back(static_cast<double>(v) * gscale);
    tr.samples += static_cast<std::int64_t>(rows);
  }
  model.zero_grad();
  return tr;
}

SymmetricMatrix splitting_matrix_from_traces(const GeluLayerTraces& tr, int neuron) {
  if (neuron < 0 || neuron >= tr.out_dim)
    throw std::invalid_argument("splitting_matrix: neuron index out of range");
  const int d = tr.in_dim;
  std::vector<double> weights(static_cast<std::size_t>(tr.samples));
  for (std::int64_t n = 0; n < tr.samples; ++n) {
    const double z = tr.z[static_cast<std::size_t>(n) * tr.out_dim + neuron];
    const double g = tr.g[static_cast<std::size_t>(n) * tr.out_dim + neuron];
    weights[static_cast<std::size_t>(n)] = g * gelu_deriv2(z);
  }
  std::vector<double> s(static_cast<std::size_t>(d) * d, 0.0);
  kern::f64().weighted_gram(static_cast<int>(tr.samples), d, tr.x.data(), weights.data(), s.data());
  return SymmetricMatrix::from_rowmajor(d, s);  // rejects non-finite accumulation
}

SymmetricMatrix linear_row_hessian(const Model& model, const std::string& layer_id, int neuron,
                                   std::span<const LabeledBatch> batches, int max_batches) {
  check_batches(batches, max_batches);
  ModelT<double> shadow = to_double(model);
  auto& layer = shadow.layer(layer_id);
  if (neuron < 0 || neuron >= layer.out_dim)
    throw std::invalid_argument("linear_row_hessian: neuron index out of range");
  const int in = layer.in_dim;
  const int out = layer.out_dim;

  // Base weight with the probed row zeroed; the row re-enters as
  // onehot(out,1) @ p(1,in) so the loss is a graph function of p.
  std::vector<double> w0(layer.weight.values());
  std::vector<double> row(static_cast<std::size_t>(in));
  for (int j = 0; j < in; ++j) {
    row[static_cast<std::size_t>(j)] = w0[static_cast<std::size_t>(neuron) * in + j];
    w0[static_cast<std::size_t>(neuron) * in + j] = 0.0;
  }
  std::vector<double> onehot(static_cast<std::size_t>(out), 0.0);
  onehot[static_cast<std::size_t>(neuron)] = 1.0;

  const Tensor<double> base_weight = Tensor<double>::from({out, in}, std::move(w0));
  const Tensor<double> pick = Tensor<double>::from({out, 1}, std::move(onehot));
  const Tensor<double> original = layer.weight;

  ParamLossFn<double> loss_fn = [&](const TensorD& p) {
    auto injected = ops::add(base_weight, ops::matmul(pick, ops::reshape(p, {1, in})));
    layer.weight = injected;
    TensorD loss;
    for (int b = 0; b < max_batches; ++b) {
      const auto& batch = batches[static_cast<std::size_t>(b)];
      auto l = ops::cross_entropy_mean(shadow.forward(cast<double>(batch.images)), batch.labels);
      loss = loss.defined() ? ops::add(loss, l) : l;
    }
    layer.weight = original;
    return ops::scale(loss, 1.0 / max_batches);
  };

  std::vector<double> h(static_cast<std::size_t>(in) * in);
  for (int i = 0; i < in; ++i) {
    std::vector<double> e(static_cast<std::size_t>(in), 0.0);
    e[static_cast<std::size_t>(i)] = 1.0;
    const auto col = hvp<double>(loss_fn, row, e);
    for (int j = 0; j < in; ++j) h[static_cast<std::size_t>(j) * in + i] = col[static_cast<std::size_t>(j)];
  }
  return SymmetricMatrix::from_rowmajor(in, h);
}

SymmetricMatrix splitting_matrix(Model& model, const std::string& layer_id, int neuron,
                                 std::span<const LabeledBatch> batches, const SpectrumOptions& opts) {
  const auto& layer = model.layer(layer_id);
  if (gelu_fronted(layer.role)) {
    const auto tr = collect_gelu_traces(model, batches, layer_id, opts.max_batches);
    return splitting_matrix_from_traces(tr, neuron);
  }
  if (opts.analytic_only) {
    // sigma'' == 0 for a linear-output neuron: the literal estimate vanishes.
    check_batches(batches, opts.max_batches);
    if (neuron < 0 || neuron >= layer.out_dim)
      throw std::invalid_argument("splitting_matrix: neuron index out of range");
    return SymmetricMatrix(layer.in_dim);
  }
  return linear_row_hessian(model, layer_id, neuron, batches, opts.max_batches);
}

SplittingSpectrum layer_spectrum(Model& model, const std::string& layer_id,
                                 std::span<const LabeledBatch> batches, const SpectrumOptions& opts) {
  const auto& layer = model.layer(layer_id);
  SplittingSpectrum spec;
  spec.layer_id = layer_id;
  spec.epoch = opts.epoch;
  spec.batch_count = opts.max_batches;
  spec.min_eigvals.assign(static_cast<std::size_t>(layer.out_dim), 0.0);

  if (!gelu_fronted(layer.role) && opts.analytic_only) {
    check_batches(batches, opts.max_batches);
    return spec;  // all zero
  }

  std::vector<double> neg_mass(static_cast<std::size_t>(layer.out_dim), 0.0);
  auto solve_range = [&](const GeluLayerTraces* traces, int lo, int hi) {
    for (int n = lo; n < hi; ++n) {
      const SymmetricMatrix m = traces
          ? splitting_matrix_from_traces(*traces, n)
          : linear_row_hessian(model, layer_id, n, batches, opts.max_batches);
      const auto ev = sym_eigvals(m);
      spec.min_eigvals[static_cast<std::size_t>(n)] = ev.front();
      double mass = 0.0;
      for (double v : ev)
        if (v < 0) mass += -v;
      neg_mass[static_cast<std::size_t>(n)] = mass;
    }
  };

  if (gelu_fronted(layer.role)) {
    const auto traces = collect_gelu_traces(model, batches, layer_id, opts.max_batches);
    const int workers = std::min(simd::threads(), layer.out_dim);
    if (workers > 1) {
      // One trace set, independent per-neuron solves.
      std::vector<std::thread> pool;
      const int chunk = (layer.out_dim + workers - 1) / workers;
      for (int t = 1; t < workers; ++t) {
        const int lo = t * chunk, hi = std::min(layer.out_dim, lo + chunk);
        if (lo < hi) pool.emplace_back([&, lo, hi] { solve_range(&traces, lo, hi); });
      }
      solve_range(&traces, 0, std::min(chunk, layer.out_dim));
      for (auto& th : pool) th.join();
    } else {
      solve_range(&traces, 0, layer.out_dim);
    }
  } else {
    solve_range(nullptr, 0, layer.out_dim);
  }
  for (double m : neg_mass) spec.negative_mass += m;
  return spec;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

std::string fmt_sig9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_svg(const std::filesystem::path& path, const SplittingSpectrum& s) {
  const int W = 640, H = 360, ml = 60, mr = 20, mt = 30, mb = 40;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());

  std::vector<std::pair<int, double>> pts;
  double ymax = 0;
  for (std::size_t i = 0; i < s.min_eigvals.size(); ++i)
    if (s.min_eigvals[i] < 0) {
      pts.emplace_back(static_cast<int>(i), -s.min_eigvals[i]);
      ymax = std::max(ymax, -s.min_eigvals[i]);
    }
  if (ymax == 0) ymax = 1.0;
  const int n = static_cast<int>(s.min_eigvals.size());

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<text x=\"" << ml << "\" y=\"18\" font-size=\"13\">" << s.layer_id
      << " epoch " << s.epoch << " (negative min eigenvalue magnitudes)</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (W / 2) << "\" y=\"" << H - 10 << "\" font-size=\"11\">neuron index</text>\n";
  out << "<text x=\"8\" y=\"" << (H / 2) << "\" font-size=\"11\" transform=\"rotate(-90 12,"
      << (H / 2) << ")\">|eigenvalue|</text>\n";
  out << "<text x=\"" << (ml - 4) << "\" y=\"" << (mt + 4) << "\" font-size=\"10\" text-anchor=\"end\">"
      << fmt_sig9(ymax) << "</text>\n";
  out << "<text x=\"" << (ml - 4) << "\" y=\"" << (H - mb) << "\" font-size=\"10\" text-anchor=\"end\">0</text>\n";
  for (const auto& [idx, mag] : pts) {
    const double px = ml + (n > 1 ? static_cast<double>(idx) / (n - 1) : 0.5) * (W - ml - mr);
    const double py = (H - mb) - (mag / ymax) * (H - mt - mb);
    out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"2.5\" fill=\"#1f6fb2\"/>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> export_spectrum(std::span<const SplittingSpectrum> spectra,
                                                   const std::filesystem::path& dir) {
  if (spectra.empty()) throw std::invalid_argument("export_spectrum: no spectra");
  std::vector<std::filesystem::path> written;
  for (const auto& s : spectra) {
    const auto subdir = dir / std::to_string(s.epoch);
    std::filesystem::create_directories(subdir);
    const auto csv_path = subdir / (s.layer_id + ".csv");
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
    csv << "epoch,layer_id,neuron_index,min_eigval\n";
    for (std::size_t i = 0; i < s.min_eigvals.size(); ++i)
      csv << s.epoch << ',' << s.layer_id << ',' << i << ',' << fmt_sig9(s.min_eigvals[i]) << '\n';
    if (!csv) throw std::runtime_error("write failed: " + csv_path.string());
    csv.close();
    const auto svg_path = subdir / (s.layer_id + ".svg");
    write_svg(svg_path, s);
    written.push_back(csv_path);
    written.push_back(svg_path);
  }
  return written;
}

SplittingSpectrum import_spectrum_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,layer_id,neuron_index,min_eigval")
    throw std::runtime_error("bad spectrum CSV header in " + file.string());
  SplittingSpectrum s;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string epoch_s, layer, idx_s, val_s;
    if (!std::getline(ls, epoch_s, ',') || !std::getline(ls, layer, ',') ||
        !std::getline(ls, idx_s, ',') || !std::getline(ls, val_s))
      throw std::runtime_error("bad spectrum CSV row in " + file.string());
    const int epoch = std::stoi(epoch_s);
    const std::size_t idx = static_cast<std::size_t>(std::stoul(idx_s));
    const double val = std::stod(val_s);
    if (first) {
      s.epoch = epoch;
      s.layer_id = layer;
      first = false;
    } else if (epoch != s.epoch || layer != s.layer_id) {
      throw std::runtime_error("mixed layers/epochs in " + file.string());
    }
    if (idx != s.min_eigvals.size()) throw std::runtime_error("non-contiguous neuron index in " + file.string());
    s.min_eigvals.push_back(val);
  }
  if (first) throw std::runtime_error("empty spectrum CSV: " + file.string());
  for (double v : s.min_eigvals)
    if (v < 0) s.negative_mass += -v;
  return s;
}

}  // namespace sprout
