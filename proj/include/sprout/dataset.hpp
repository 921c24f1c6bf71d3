// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sprout/batch.hpp"
#include "sprout/rng.hpp"

namespace sprout {

struct DatasetSpec {
  std::string name = "synthetic";  // synthetic | idx | cifar
  std::string path;                // directory with the binary files (idx/cifar)
  int classes = 10;                // synthetic only; file formats carry their own
  int train_samples = 1024;        // synthetic only
  int eval_samples = 256;          // synthetic only
  double noise = 0.25;             // synthetic pixel-noise sigma
  bool hflip = false;              // train-time random horizontal flip

  bool operator==(const DatasetSpec&) const = default;
};

/// In-memory dataset; images normalized per channel with statistics from the
/// train split.
struct Dataset {
  int channels = 1, height = 28, width = 28, classes = 10;
  std::vector<float> train_images;
  std::vector<int> train_labels;
  std::vector<float> eval_images;
  std::vector<int> eval_labels;
  std::vector<float> mean, stdev;  // per channel

  int train_count() const { return static_cast<int>(train_labels.size()); }
  int eval_count() const { return static_cast<int>(eval_labels.size()); }
  std::size_t sample_size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
};

/// Supported sources: IDX image/label pairs (MNIST layout), CIFAR binary
/// batches (3073-byte records), and a procedurally generated class-blob set
/// that is bitwise deterministic in (spec, seed).
Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Deterministic shuffle of [0, count) from (seed, epoch).
std::vector<int> epoch_order(int count, std::uint64_t seed, int epoch);

LabeledBatch make_batch(const Dataset& ds, std::span<const int> indices, bool eval_split = false);

/// Mirror each sample left-right with probability 1/2 (the only train-time
/// augmentation besides normalization). Never applied to eval batches.
void random_hflip(LabeledBatch& batch, int height, int width, int channels, Rng& rng);

}  // namespace sprout
