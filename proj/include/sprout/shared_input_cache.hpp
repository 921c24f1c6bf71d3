// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sprout/tensor.hpp"

namespace sprout {

/// Deduplicates the per-layer input copies saved for backward. Keyed by the
/// 32-bit mean of the input's elements (bit pattern); inputs that collide on
/// the key but differ elementwise coexist in a chained bucket. Scoped to one
/// forward/backward cycle on one thread.
template <typename T>
class SharedInputCache {
 public:
  using Buffer = std::shared_ptr<const std::vector<T>>;

  /// Returns the single stored copy for this input, creating it on first
  /// sight; bumps the consumer count.
  Buffer register_input(const Tensor<T>& t) {
    const std::uint32_t key = mean_key(t.values());
    auto& bucket = table_[key];
    for (auto& entry : bucket) {
      if (*entry.buffer == t.values()) {
        ++entry.consumers;
        return entry.buffer;
      }
    }
    bucket.push_back(Entry{std::make_shared<const std::vector<T>>(t.values()), 1});
    ++stored_;
    return bucket.back().buffer;
  }

  std::size_t stored_buffers() const { return stored_; }

  std::size_t consumer_count(const Tensor<T>& t) const {
    const auto it = table_.find(mean_key(t.values()));
    if (it == table_.end()) return 0;
    for (const auto& entry : it->second)
      if (*entry.buffer == t.values()) return entry.consumers;
    return 0;
  }

  std::size_t bucket_size(std::uint32_t key) const {
    const auto it = table_.find(key);
    return it == table_.end() ? 0 : it->second.size();
  }

  bool empty() const { return table_.empty(); }

  void clear() {
    table_.clear();
    stored_ = 0;
  }

  static std::uint32_t mean_key(const std::vector<T>& values) {
    double sum = 0.0;
    for (const T v : values) sum += static_cast<double>(v);
    const float mean = values.empty() ? 0.0f : static_cast<float>(sum / static_cast<double>(values.size()));
    std::uint32_t bits;
    std::memcpy(&bits, &mean, sizeof(bits));
    return bits;
  }

 private:
  struct Entry {
    std::shared_ptr<const std::vector<T>> buffer;
    std::size_t consumers = 0;
  };
  std::unordered_map<std::uint32_t, std::vector<Entry>> table_;
  std::size_t stored_ = 0;
};

/// Per-layer tensors recorded during a traced forward pass. `preact` is the
/// layer output (base affine plus branches); `act` the nonlinearity output
/// when one follows the layer. Gradients become available after backward.
template <typename T>
struct LayerTrace {
  Tensor<T> input;
  Tensor<T> preact;
  Tensor<T> act;
};

/// Ambient state for one forward/backward cycle: the shared-input cache plus
/// optional layer-trace capture. Installed with ContextGuard; confined to one
/// thread and one model instance at a time.
template <typename T>
struct ForwardContext {
  bool cache_enabled = true;
  SharedInputCache<T> cache;
  std::size_t uncached_copies = 0;   // copies saved while the cache is off
  std::size_t registrations = 0;     // consumer-side saves, either way

  std::set<std::string> trace_want;
  std::map<std::string, LayerTrace<T>> traces;

  std::size_t saved_buffer_count() const {
    return cache_enabled ? cache.stored_buffers() : uncached_copies;
  }
};

template <typename T>
ForwardContext<T>* current_context();

template <typename T>
class ContextGuard {
 public:
  explicit ContextGuard(ForwardContext<T>& ctx);
  ~ContextGuard();
  ContextGuard(const ContextGuard&) = delete;
  ContextGuard& operator=(const ContextGuard&) = delete;

 private:
  ForwardContext<T>* prev_;
};

/// Save an activation for use in a backward closure. With an active caching
/// context this goes through the shared-input cache (one copy per distinct
/// tensor); otherwise every consumer keeps its own private copy.
template <typename T>
std::shared_ptr<const std::vector<T>> save_activation(const Tensor<T>& x);

}  // namespace sprout
