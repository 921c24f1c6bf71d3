// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sprout/rng.hpp"

namespace sprout {

namespace {

namespace fs = std::filesystem;

std::uint32_t read_be32(std::ifstream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

struct RawSplit {
  std::vector<float> images;  // [0,1]
  std::vector<int> labels;
};

RawSplit load_idx_pair(const fs::path& images_path, const fs::path& labels_path, int& rows, int& cols) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot open " + images_path.string());
  if (read_be32(imgs, "image magic") != 0x00000803u)
    throw std::runtime_error("idx: bad image magic in " + images_path.string());
  const auto n = read_be32(imgs, "image count");
  rows = static_cast<int>(read_be32(imgs, "rows"));
  cols = static_cast<int>(read_be32(imgs, "cols"));

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("idx: cannot open " + labels_path.string());
  if (read_be32(labs, "label magic") != 0x00000801u)
    throw std::runtime_error("idx: bad label magic in " + labels_path.string());
  if (read_be32(labs, "label count") != n)
    throw std::runtime_error("idx: image/label counts differ for " + images_path.string());

  RawSplit out;
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> buf(pixels);
  out.images.resize(static_cast<std::size_t>(n) * pixels);
  out.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!imgs) throw std::runtime_error("idx: truncated image data in " + images_path.string());
    for (std::size_t p = 0; p < pixels; ++p)
      out.images[i * pixels + p] = static_cast<float>(buf[p]) / 255.0f;
    unsigned char l;
    labs.read(reinterpret_cast<char*>(&l), 1);
    if (!labs) throw std::runtime_error("idx: truncated label data in " + labels_path.string());
    out.labels[i] = static_cast<int>(l);
  }
  return out;
}

RawSplit load_cifar_files(const std::vector<fs::path>& files, int classes) {
  RawSplit out;
  constexpr std::size_t kRecord = 3073;  // 1 label + 3*32*32 pixels
  constexpr std::size_t kPixels = 3072;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw std::runtime_error("cifar: cannot open " + f.string());
    const auto size = fs::file_size(f);
    if (size == 0 || size % kRecord != 0)
      throw std::runtime_error("cifar: file size " + std::to_string(size) +
                               " is not a multiple of 3073 in " + f.string());
    const std::size_t count = size / kRecord;
    std::vector<unsigned char> rec(kRecord);
    for (std::size_t i = 0; i < count; ++i) {
      in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(kRecord));
      if (!in) throw std::runtime_error("cifar: truncated record in " + f.string());
      const int label = static_cast<int>(rec[0]);
      if (label < 0 || label >= classes)
        throw std::runtime_error("cifar: label " + std::to_string(label) + " out of range in " + f.string());
      out.labels.push_back(label);
      for (std::size_t p = 0; p < kPixels; ++p)
        out.images.push_back(static_cast<float>(rec[1 + p]) / 255.0f);
    }
  }
  return out;
}

// Procedural class-blob images: each class owns a handful of Gaussian blobs,
// samples jitter the blob centres and add pixel noise.
struct BlobProto {
  double cx, cy, sigma, amp;
};

std::vector<std::vector<BlobProto>> class_prototypes(const DatasetSpec& spec, std::uint64_t seed) {
  std::vector<std::vector<BlobProto>> protos(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) {
    Rng rng = Rng(seed).fork(0xb10b0000ULL + static_cast<std::uint64_t>(c));
    const int blobs = 2 + static_cast<int>(rng.next_below(2));  // 2..3
    for (int b = 0; b < blobs; ++b)
      protos[static_cast<std::size_t>(c)].push_back(BlobProto{
          rng.uniform(7.0, 21.0), rng.uniform(7.0, 21.0), rng.uniform(1.6, 3.2), rng.uniform(0.65, 1.0)});
  }
  return protos;
}

void render_sample(std::span<float> img, int side, const std::vector<BlobProto>& proto, Rng& rng,
                   double noise) {
  const double jx = rng.uniform(-1.5, 1.5);
  const double jy = rng.uniform(-1.5, 1.5);
  std::fill(img.begin(), img.end(), 0.0f);
  for (const auto& b : proto) {
    const double cx = b.cx + jx, cy = b.cy + jy;
    const double inv2s2 = 1.0 / (2.0 * b.sigma * b.sigma);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        img[static_cast<std::size_t>(y) * side + x] +=
            static_cast<float>(b.amp * std::exp(-d2 * inv2s2));
      }
  }
  for (auto& px : img) {
    px += static_cast<float>(noise * rng.normal());
    px = std::clamp(px, 0.0f, 1.0f);
  }
}

RawSplit synth_split(const DatasetSpec& spec, std::uint64_t seed, int count, std::uint64_t salt) {
  RawSplit out;
  const int side = 28;
  const auto protos = class_prototypes(spec, seed);
  out.images.resize(static_cast<std::size_t>(count) * side * side);
  out.labels.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int label = i % spec.classes;
    Rng rng = Rng(seed).fork(salt + static_cast<std::uint64_t>(i));
    render_sample(std::span<float>(out.images).subspan(static_cast<std::size_t>(i) * side * side,
                                                       static_cast<std::size_t>(side) * side),
                  side, protos[static_cast<std::size_t>(label)], rng, spec.noise);
    out.labels[static_cast<std::size_t>(i)] = label;
  }
  return out;
}

void normalize(Dataset& ds) {
  const std::size_t chan_px = static_cast<std::size_t>(ds.height) * ds.width;
  ds.mean.assign(static_cast<std::size_t>(ds.channels), 0.0f);
  ds.stdev.assign(static_cast<std::size_t>(ds.channels), 1.0f);
  const std::size_t n = ds.train_labels.size();
  if (n == 0) throw std::runtime_error("dataset: empty train split");
  for (int c = 0; c < ds.channels; ++c) {
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* px = ds.train_images.data() + i * ds.sample_size() + static_cast<std::size_t>(c) * chan_px;
      for (std::size_t p = 0; p < chan_px; ++p) {
        sum += px[p];
        sq += static_cast<double>(px[p]) * px[p];
      }
    }
    const double total = static_cast<double>(n) * chan_px;
    const double m = sum / total;
    const double var = std::max(1e-8, sq / total - m * m);
    ds.mean[static_cast<std::size_t>(c)] = static_cast<float>(m);
    ds.stdev[static_cast<std::size_t>(c)] = static_cast<float>(std::sqrt(var));
  }
  auto apply = [&](std::vector<float>& images) {
    const std::size_t count = images.size() / ds.sample_size();
    for (std::size_t i = 0; i < count; ++i)
      for (int c = 0; c < ds.channels; ++c) {
        float* px = images.data() + i * ds.sample_size() + static_cast<std::size_t>(c) * chan_px;
        for (std::size_t p = 0; p < chan_px; ++p)
          px[p] = (px[p] - ds.mean[static_cast<std::size_t>(c)]) / ds.stdev[static_cast<std::size_t>(c)];
      }
  };
  apply(ds.train_images);
  apply(ds.eval_images);
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset ds;
  if (spec.name == "synthetic") {
    if (spec.classes < 2) throw std::invalid_argument("synthetic dataset needs >= 2 classes");
    ds.channels = 1;
    ds.height = ds.width = 28;
    ds.classes = spec.classes;
    auto train = synth_split(spec, seed, spec.train_samples, 0);
    auto eval = synth_split(spec, seed, spec.eval_samples, 0x5eed00000000ULL);
    ds.train_images = std::move(train.images);
    ds.train_labels = std::move(train.labels);
    ds.eval_images = std::move(eval.images);
    ds.eval_labels = std::move(eval.labels);
  } else if (spec.name == "idx") {
    const fs::path dir(spec.path);
    int rows = 0, cols = 0;
    auto train = load_idx_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", rows, cols);
    int erows = 0, ecols = 0;
    auto eval = load_idx_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", erows, ecols);
    if (erows != rows || ecols != cols) throw std::runtime_error("idx: train/eval dimensions differ");
    ds.channels = 1;
    ds.height = rows;
    ds.width = cols;
    int max_label = 0;
    for (int l : train.labels) max_label = std::max(max_label, l);
    for (int l : eval.labels) max_label = std::max(max_label, l);
    ds.classes = max_label + 1;
    ds.train_images = std::move(train.images);
    ds.train_labels = std::move(train.labels);
    ds.eval_images = std::move(eval.images);
    ds.eval_labels = std::move(eval.labels);
  } else if (spec.name == "cifar") {
    const fs::path dir(spec.path);
    std::vector<fs::path> train_files;
    for (int i = 1; i <= 6; ++i) {
      const auto f = dir / ("data_batch_" + std::to_string(i) + ".bin");
      if (fs::exists(f)) train_files.push_back(f);
    }
    if (train_files.empty()) throw std::runtime_error("cifar: no data_batch_*.bin under " + spec.path);
    ds.channels = 3;
    ds.height = ds.width = 32;
    ds.classes = spec.classes;
    auto train = load_cifar_files(train_files, ds.classes);
    const auto test_file = dir / "test_batch.bin";
    auto eval = fs::exists(test_file) ? load_cifar_files({test_file}, ds.classes) : RawSplit{};
    ds.train_images = std::move(train.images);
    ds.train_labels = std::move(train.labels);
    ds.eval_images = std::move(eval.images);
    ds.eval_labels = std::move(eval.labels);
    if (ds.eval_labels.empty()) {
      // hold out the tail of the train split
      const int hold = std::max(1, ds.train_count() / 10);
      const std::size_t cut = static_cast<std::size_t>(ds.train_count() - hold) * ds.sample_size();
      ds.eval_images.assign(ds.train_images.begin() + static_cast<std::ptrdiff_t>(cut), ds.train_images.end());
      ds.eval_labels.assign(ds.train_labels.end() - hold, ds.train_labels.end());
      ds.train_images.resize(cut);
      ds.train_labels.resize(static_cast<std::size_t>(ds.train_count() - hold));
    }
  } else {
    throw std::invalid_argument("unknown dataset kind: " + spec.name);
  }
  for (int l : ds.train_labels)
    if (l < 0 || l >= ds.classes) throw std::runtime_error("dataset: train label out of range");
  for (int l : ds.eval_labels)
    if (l < 0 || l >= ds.classes) throw std::runtime_error("dataset: eval label out of range");
  normalize(ds);
  return ds;
}

std::vector<int> epoch_order(int count, std::uint64_t seed, int epoch) {
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng = Rng(seed).fork(0x0e90c4 + static_cast<std::uint64_t>(epoch));
  rng.shuffle(order);
  return order;
}

void random_hflip(LabeledBatch& batch, int height, int width, int channels, Rng& rng) {
  auto& vals = batch.images.mutable_values();
  const std::size_t sample = static_cast<std::size_t>(channels) * height * width;
  for (std::size_t s = 0; s < batch.labels.size(); ++s) {
    if (rng.next_below(2) == 0) continue;
    float* img = vals.data() + s * sample;
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < height; ++y) {
        float* row = img + (static_cast<std::size_t>(c) * height + y) * width;
        for (int x = 0; x < width / 2; ++x) std::swap(row[x], row[width - 1 - x]);
      }
  }
}

LabeledBatch make_batch(const Dataset& ds, std::span<const int> indices, bool eval_split) {
  const auto& images = eval_split ? ds.eval_images : ds.train_images;
  const auto& labels = eval_split ? ds.eval_labels : ds.train_labels;
  const std::size_t ss = ds.sample_size();
  LabeledBatch batch;
  std::vector<float> buf(indices.size() * ss);
  batch.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= labels.size())
      throw std::invalid_argument("make_batch: sample index out of range");
    std::copy_n(images.data() + static_cast<std::size_t>(idx) * ss, ss, buf.data() + i * ss);
    batch.labels.push_back(labels[static_cast<std::size_t>(idx)]);
  }
  batch.images = TensorF::from({static_cast<int>(indices.size()), ds.channels, ds.height, ds.width},
                               std::move(buf));
  return batch;
}

}  // namespace sprout
