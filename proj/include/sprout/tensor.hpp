// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sprout {

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const std::vector<int>& shape);

template <typename T>
struct TensorData;

/// Dense row-major tensor with reverse-mode autodiff. A Tensor is a cheap
/// handle; copies share the underlying buffer and graph node. float is the
/// training type, double backs the second-order / shadow oracles.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, T value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value);

  bool defined() const { return static_cast<bool>(d_); }
  const std::vector<int>& shape() const { return data().shape; }
  int dim(int axis) const { return data().shape.at(static_cast<std::size_t>(axis)); }
  int rank() const { return static_cast<int>(data().shape.size()); }
  std::size_t numel() const { return data().values.size(); }

  const std::vector<T>& values() const { return data().values; }
  /// Leaf mutation hook for the optimizer and growth; never call on a tensor
  /// that is a live graph intermediate.
  std::vector<T>& mutable_values() { return data().values; }

  bool requires_grad() const { return data().requires_grad; }
  void set_requires_grad(bool v) { data().requires_grad = v; }

  /// True if backward will propagate through this tensor.
  bool participates() const { return d_ && (d_->requires_grad || d_->in_graph); }

  bool has_grad() const { return d_ && !d_->grad.empty(); }
  const std::vector<T>& grad() const {
    if (!has_grad()) throw std::runtime_error("tensor has no gradient");
    return d_->grad;
  }
  /// Gradient buffer, zero-initialised on first touch.
  std::vector<T>& grad_buffer() {
    auto& d = data();
    if (d.grad.empty()) d.grad.assign(d.values.size(), T(0));
    return d.grad;
  }
  void zero_grad() {
    if (d_ && !d_->grad.empty()) d_->grad.assign(d_->values.size(), T(0));
  }

  T item() const {
    if (numel() != 1) throw std::invalid_argument("item(): tensor is not scalar");
    return data().values[0];
  }

  /// Deep copy of the values as a fresh leaf (no graph, no grad).
  Tensor detached_copy() const { return from(shape(), values()); }

  TensorData<T>* node_id() const { return d_.get(); }
  TensorData<T>& data() {
    if (!d_) throw std::runtime_error("use of undefined tensor");
    return *d_;
  }
  const TensorData<T>& data() const {
    if (!d_) throw std::runtime_error("use of undefined tensor");
    return *d_;
  }

  static Tensor adopt(std::shared_ptr<TensorData<T>> d) {
    Tensor t;
    t.d_ = std::move(d);
    return t;
  }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

template <typename T>
struct TensorData {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until touched
  bool requires_grad = false;

  // Graph linkage. backfn reads this->grad and accumulates into parents.
  bool in_graph = false;
  bool consumed = false;
  std::vector<Tensor<T>> parents;
  std::function<void(TensorData<T>&)> backfn;
};

template <typename T>
Tensor<T> Tensor<T>::zeros(std::vector<int> shape, bool requires_grad) {
  auto d = std::make_shared<TensorData<T>>();
  d->values.assign(shape_numel(shape), T(0));
  d->shape = std::move(shape);
  d->requires_grad = requires_grad;
  return adopt(std::move(d));
}

template <typename T>
Tensor<T> Tensor<T>::full(std::vector<int> shape, T value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (auto& v : t.mutable_values()) v = value;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from(std::vector<int> shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  auto d = std::make_shared<TensorData<T>>();
  d->shape = std::move(shape);
  d->values = std::move(values);
  d->requires_grad = requires_grad;
  return adopt(std::move(d));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return from({1}, {value});
}

/// Reverse-mode sweep from a scalar loss. Populates grad on every
/// participating tensor reachable from `loss`. Each graph may be swept once;
/// a second call without a fresh forward pass throws.
template <typename T>
void backward(Tensor<T> loss);

/// Cast between scalar types (produces a detached leaf).
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  std::vector<To> out(t.numel());
  const auto& v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<To>(v[i]);
  return Tensor<To>::from(t.shape(), std::move(out));
}

/// Graph recording switch; ops run under NoGradGuard produce plain leaves.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace sprout
