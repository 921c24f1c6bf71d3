// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "sprout/growth.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace sprout {

namespace {

constexpr std::uint32_t kMagic = 0x53505254;  // "SPRT"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::string get_string(std::ifstream& in) {
  const auto len = get<std::uint16_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());

  put(out, kMagic);
  put(out, kVersion);
  const ModelConfig& c = model.cfg;
  for (int v : {c.embed_dim, c.depth, c.num_heads, c.fc_reduce, c.attn_reduce, c.patch_size,
                c.image_size, c.num_classes, c.in_chans})
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  put<double>(out, c.mlp_ratio);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.trained_epochs));

  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.growth_history.size()));
  for (const auto& ev : model.growth_history) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ev.epoch));
    put_string(out, ev.layer_id);
    put<float>(out, ev.scaling_factor);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ev.indices.size()));
    for (int i : ev.indices) put<std::uint32_t>(out, static_cast<std::uint32_t>(i));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(ev.param_delta));
  }

  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_string(out, p.name);
    const auto& shape = p.tensor.shape();
    put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
    for (int d : shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    const auto& v = p.tensor.values();
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  if (get<std::uint32_t>(in) != kMagic) throw std::runtime_error("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  ModelConfig c;
  c.embed_dim = static_cast<int>(get<std::uint32_t>(in));
  c.depth = static_cast<int>(get<std::uint32_t>(in));
  c.num_heads = static_cast<int>(get<std::uint32_t>(in));
  c.fc_reduce = static_cast<int>(get<std::uint32_t>(in));
  c.attn_reduce = static_cast<int>(get<std::uint32_t>(in));
  c.patch_size = static_cast<int>(get<std::uint32_t>(in));
  c.image_size = static_cast<int>(get<std::uint32_t>(in));
  c.num_classes = static_cast<int>(get<std::uint32_t>(in));
  c.in_chans = static_cast<int>(get<std::uint32_t>(in));
  c.mlp_ratio = get<double>(in);

  Model model = build_model(c, 0);
  model.trained_epochs = static_cast<int>(get<std::uint32_t>(in));

  // Recreate branch shells by replaying the recorded events, then overwrite
  // every tensor with the stored values.
  const auto n_events = get<std::uint32_t>(in);
  for (std::uint32_t e = 0; e < n_events; ++e) {
    const int epoch = static_cast<int>(get<std::uint32_t>(in));
    const std::string layer_id = get_string(in);
    const float sf = get<float>(in);
    const auto n_idx = get<std::uint32_t>(in);
    std::vector<int> indices(n_idx);
    for (auto& i : indices) i = static_cast<int>(get<std::uint32_t>(in));
    const auto delta = static_cast<std::int64_t>(get<std::uint64_t>(in));
    grow(model.layer(layer_id), model, indices, sf, epoch);
    auto& ev = model.growth_history.back();
    if (ev.param_delta != delta) throw std::runtime_error("checkpoint: growth delta mismatch");
  }

  auto params = model.parameters();
  std::map<std::string, TensorF*> by_name;
  for (auto& p : params) by_name[p.name] = &p.tensor;

  const auto n_params = get<std::uint32_t>(in);
  if (n_params != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string name = get_string(in);
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown parameter " + name);
    const auto rank = get<std::uint8_t>(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(get<std::uint32_t>(in));
    if (shape != it->second->shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    auto& v = it->second->mutable_values();
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data for " + name);
  }
  return model;
}

}  // namespace sprout
