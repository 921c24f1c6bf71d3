// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "sprout/shared_input_cache.hpp"

namespace sprout {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

template <typename T>
void backward(Tensor<T> loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.participates()) throw std::invalid_argument("backward: loss does not participate in a graph");

  // Iterative post-order DFS over the graph.
  std::vector<TensorData<T>*> order;
  std::unordered_set<TensorData<T>*> seen;
  struct Frame {
    Tensor<T> t;
    std::size_t next_parent = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({loss});
  seen.insert(loss.node_id());
  while (!stack.empty()) {
    Frame& f = stack.back();
    auto& d = f.t.data();
    if (f.next_parent < d.parents.size()) {
      Tensor<T> p = d.parents[f.next_parent++];
      if (p.participates() && !seen.count(p.node_id())) {
        seen.insert(p.node_id());
        stack.push_back({p});
      }
    } else {
      order.push_back(f.t.node_id());
      stack.pop_back();
    }
  }

  loss.grad_buffer()[0] = T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorData<T>* d = *it;
    if (!d->in_graph) continue;
    if (d->consumed)
      throw std::runtime_error("backward invoked twice on the same graph; run a new forward pass first");
    if (d->grad.empty()) d->grad.assign(d->values.size(), T(0));
    if (d->backfn) d->backfn(*d);
    d->consumed = true;
    d->backfn = nullptr;  // releases saved activations as the sweep retires nodes
  }
}

template void backward<float>(Tensor<float>);
template void backward<double>(Tensor<double>);

namespace {
template <typename T>
ForwardContext<T>*& context_slot() {
  thread_local ForwardContext<T>* ctx = nullptr;
  return ctx;
}
}  // namespace

template <typename T>
ForwardContext<T>* current_context() {
  return context_slot<T>();
}

template <typename T>
ContextGuard<T>::ContextGuard(ForwardContext<T>& ctx) : prev_(context_slot<T>()) {
  context_slot<T>() = &ctx;
}

template <typename T>
ContextGuard<T>::~ContextGuard() {
  if (context_slot<T>()) context_slot<T>()->cache.clear();
  context_slot<T>() = prev_;
}

template <typename T>
std::shared_ptr<const std::vector<T>> save_activation(const Tensor<T>& x) {
  ForwardContext<T>* ctx = current_context<T>();
  if (ctx) {
    ++ctx->registrations;
    if (ctx->cache_enabled) return ctx->cache.register_input(x);
    ++ctx->uncached_copies;
  }
  return std::make_shared<const std::vector<T>>(x.values());
}

template ForwardContext<float>* current_context<float>();
template ForwardContext<double>* current_context<double>();
template class ContextGuard<float>;
template class ContextGuard<double>;
template std::shared_ptr<const std::vector<float>> save_activation<float>(const Tensor<float>&);
template std::shared_ptr<const std::vector<double>> save_activation<double>(const Tensor<double>&);

}  // namespace sprout
