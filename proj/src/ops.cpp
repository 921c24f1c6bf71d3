// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0

#include "sprout/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sprout/kernels.hpp"
#include "sprout/shared_input_cache.hpp"

namespace sprout::ops {

namespace {

template <typename T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> values,
                  std::vector<Tensor<T>> parents,
                  std::function<void(TensorData<T>&)> backfn) {
  auto out = Tensor<T>::from(std::move(shape), std::move(values));
  bool participates = false;
  if (grad_enabled())
    for (const auto& p : parents)
      if (p.participates()) participates = true;
  if (participates) {
    auto& d = out.data();
    d.in_graph = true;
    d.parents = std::move(parents);
    d.backfn = std::move(backfn);
  }
  return out;
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

template <typename T>
bool wants(const Tensor<T>& t) {
  return t.participates();
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  const auto& k = kern::table<T>();
  std::vector<T> out(a.numel());
  k.add(out.size(), a.values().data(), b.values().data(), out.data());
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorData<T>& self) {
    const auto& kk = kern::table<T>();
    for (auto& p : self.parents) {
      if (!p.participates()) continue;
      kk.axpy(self.grad.size(), T(1), self.grad.data(), p.grad_buffer().data());
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  const auto& k = kern::table<T>();
  std::vector<T> out(a.numel());
  k.sub(out.size(), a.values().data(), b.values().data(), out.data());
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorData<T>& self) {
    const auto& kk = kern::table<T>();
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa.participates()) kk.axpy(self.grad.size(), T(1), self.grad.data(), pa.grad_buffer().data());
    if (pb.participates()) kk.axpy(self.grad.size(), T(-1), self.grad.data(), pb.grad_buffer().data());
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  const auto& k = kern::table<T>();
  std::vector<T> out(a.numel());
  k.mul(out.size(), a.values().data(), b.values().data(), out.data());
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorData<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const auto& av = pa.values();
    const auto& bv = pb.values();
    if (pa.participates()) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * bv[i];
    }
    if (pb.participates()) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * av[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T alpha) {
  const auto& k = kern::table<T>();
  std::vector<T> out(a.numel());
  k.scale(out.size(), alpha, a.values().data(), out.data());
  return make_op<T>(a.shape(), std::move(out), {a}, [alpha](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    kern::table<T>().axpy(self.grad.size(), alpha, self.grad.data(), p.grad_buffer().data());
  });
}

template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() > as.size() ||
      !std::equal(bs.rbegin(), bs.rend(), as.rbegin()))
    throw std::invalid_argument("add_broadcast: " + shape_str(bs) + " is not a suffix of " + shape_str(as));
  const std::size_t nb = b.numel();
  const std::size_t rows = a.numel() / nb;
  const auto& k = kern::table<T>();
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r)
    k.add(nb, a.values().data() + r * nb, b.values().data(), out.data() + r * nb);
  return make_op<T>(a.shape(), std::move(out), {a, b}, [nb, rows](TensorData<T>& self) {
    const auto& kk = kern::table<T>();
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa.participates()) kk.axpy(self.grad.size(), T(1), self.grad.data(), pa.grad_buffer().data());
    if (pb.participates()) {
      auto& gb = pb.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        kk.axpy(nb, T(1), self.grad.data() + r * nb, gb.data());
    }
  });
}

template <typename T>
Tensor<T> expand_leading(const Tensor<T>& t, int count) {
  if (count <= 0) throw std::invalid_argument("expand_leading: count must be positive");
  const std::size_t n = t.numel();
  std::vector<int> shape;
  shape.push_back(count);
  for (int d : t.shape()) shape.push_back(d);
  std::vector<T> out(n * static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c)
    std::memcpy(out.data() + static_cast<std::size_t>(c) * n, t.values().data(), n * sizeof(T));
  return make_op<T>(std::move(shape), std::move(out), {t}, [n, count](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    const auto& kk = kern::table<T>();
    auto& g = p.grad_buffer();
    for (int c = 0; c < count; ++c)
      kk.axpy(n, T(1), self.grad.data() + static_cast<std::size_t>(c) * n, g.data());
  });
}

namespace {

struct MatDims {
  std::size_t batch;
  int m, k, n;
};

template <typename T>
MatDims matmul_dims(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() < 2 || bs.size() != as.size())
    throw std::invalid_argument("matmul: ranks " + shape_str(as) + " x " + shape_str(bs));
  for (std::size_t i = 0; i + 2 < as.size(); ++i)
    if (as[i] != bs[i])
      throw std::invalid_argument("matmul: batch dims differ " + shape_str(as) + " x " + shape_str(bs));
  const int m = as[as.size() - 2], k = as[as.size() - 1];
  const int kb = bs[bs.size() - 2], n = bs[bs.size() - 1];
  if (k != kb)
    throw std::invalid_argument("matmul: inner dims differ " + shape_str(as) + " x " + shape_str(bs));
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= static_cast<std::size_t>(as[i]);
  return {batch, m, k, n};
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const MatDims d = matmul_dims(a, b);
  const auto& k = kern::table<T>();
  std::vector<T> out(d.batch * static_cast<std::size_t>(d.m) * d.n);
  for (std::size_t s = 0; s < d.batch; ++s)
    k.gemm_nn(d.m, d.k, d.n,
              a.values().data() + s * static_cast<std::size_t>(d.m) * d.k,
              b.values().data() + s * static_cast<std::size_t>(d.k) * d.n,
              out.data() + s * static_cast<std::size_t>(d.m) * d.n, false);
  std::vector<int> oshape(a.shape());
  oshape[oshape.size() - 1] = d.n;
  return make_op<T>(std::move(oshape), std::move(out), {a, b}, [d](TensorData<T>& self) {
    const auto& kk = kern::table<T>();
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const std::size_t an = static_cast<std::size_t>(d.m) * d.k;
    const std::size_t bn = static_cast<std::size_t>(d.k) * d.n;
    const std::size_t cn = static_cast<std::size_t>(d.m) * d.n;
    if (pa.participates()) {
      auto& ga = pa.grad_buffer();
      for (std::size_t s = 0; s < d.batch; ++s)
        kk.gemm_nt(d.m, d.n, d.k, self.grad.data() + s * cn, pb.values().data() + s * bn,
                   ga.data() + s * an, true);
    }
    if (pb.participates()) {
      auto& gb = pb.grad_buffer();
      for (std::size_t s = 0; s < d.batch; ++s)
        kk.gemm_tn(d.k, d.m, d.n, pa.values().data() + s * an, self.grad.data() + s * cn,
                   gb.data() + s * bn, true);
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.rank() != 2) throw std::invalid_argument("linear: weight must be 2-D, got " + shape_str(w.shape()));
  const int out_dim = w.dim(0), in_dim = w.dim(1);
  if (x.rank() < 1 || x.shape().back() != in_dim)
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  if (b.defined() && (b.rank() != 1 || b.dim(0) != out_dim))
    throw std::invalid_argument("linear: bias " + shape_str(b.shape()) + " vs weight " + shape_str(w.shape()));

  const int rows = static_cast<int>(x.numel() / static_cast<std::size_t>(in_dim));
  const auto& k = kern::table<T>();
  std::vector<T> out(static_cast<std::size_t>(rows) * out_dim);
  k.gemm_nt(rows, in_dim, out_dim, x.values().data(), w.values().data(), out.data(), false);
  if (b.defined())
    for (int r = 0; r < rows; ++r)
      k.add(static_cast<std::size_t>(out_dim), out.data() + static_cast<std::size_t>(r) * out_dim,
            b.values().data(), out.data() + static_cast<std::size_t>(r) * out_dim);

  std::vector<int> oshape(x.shape());
  oshape.back() = out_dim;

  // The saved input copy is what the shared-input cache deduplicates;
  // skipped entirely when no backward pass can reach this op.
  const bool recording =
      grad_enabled() && (x.participates() || w.participates() || (b.defined() && b.participates()));
  std::shared_ptr<const std::vector<T>> x_saved;
  if (recording) x_saved = save_activation(x);

  std::vector<Tensor<T>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  const bool has_bias = b.defined();
  return make_op<T>(std::move(oshape), std::move(out), std::move(parents),
                    [x_saved, rows, in_dim, out_dim, has_bias](TensorData<T>& self) {
    const auto& kk = kern::table<T>();
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    if (px.participates())
      kk.gemm_nn(rows, out_dim, in_dim, self.grad.data(), pw.values().data(),
                 px.grad_buffer().data(), true);
    if (pw.participates())
      kk.gemm_tn(out_dim, rows, in_dim, self.grad.data(), x_saved->data(),
                 pw.grad_buffer().data(), true);
    if (has_bias && self.parents[2].participates()) {
      auto& gb = self.parents[2].grad_buffer();
      for (int r = 0; r < rows; ++r)
        kk.axpy(static_cast<std::size_t>(out_dim), T(1),
                self.grad.data() + static_cast<std::size_t>(r) * out_dim, gb.data());
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w) {
  return linear(x, w, Tensor<T>());
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& z) {
  const auto& k = kern::table<T>();
  std::vector<T> out(z.numel());
  k.gelu(out.size(), z.values().data(), out.data());
  return make_op<T>(z.shape(), std::move(out), {z}, [](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    kern::table<T>().gelu_grad(self.grad.size(), p.values().data(), self.grad.data(),
                               p.grad_buffer().data());
  });
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  if (x.rank() < 1) throw std::invalid_argument("softmax: rank-0 input");
  const int cols = x.shape().back();
  const std::size_t rows = x.numel() / static_cast<std::size_t>(cols);
  const auto& k = kern::table<T>();
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    k.softmax_row(cols, x.values().data() + r * cols, out.data() + r * cols);
  return make_op<T>(x.shape(), std::move(out), {x}, [rows, cols](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    auto& gx = p.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.values.data() + r * cols;
      const T* g = self.grad.data() + r * cols;
      T dot = 0;
      for (int j = 0; j < cols; ++j) dot += g[j] * y[j];
      T* out_g = gx.data() + r * cols;
      for (int j = 0; j < cols; ++j) out_g[j] += y[j] * (g[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const int cols = x.shape().back();
  if (gamma.numel() != static_cast<std::size_t>(cols) || beta.numel() != static_cast<std::size_t>(cols))
    throw std::invalid_argument("layernorm: affine params must match last dim");
  const std::size_t rows = x.numel() / static_cast<std::size_t>(cols);
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  const T* gv = gamma.values().data();
  const T* bv = beta.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv + r * cols;
    double m = 0, v = 0;
    for (int j = 0; j < cols; ++j) m += row[j];
    m /= cols;
    for (int j = 0; j < cols; ++j) {
      const double c = row[j] - m;
      v += c * c;
    }
    v /= cols;
    const T mu = static_cast<T>(m);
    const T inv = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
    T* orow = out.data() + r * cols;
    for (int j = 0; j < cols; ++j) orow[j] = gv[j] * ((row[j] - mu) * inv) + bv[j];
  }
  return make_op<T>(x.shape(), std::move(out), {x, gamma, beta},
                    [rows, cols, eps](TensorData<T>& self) {
    auto& px = self.parents[0];
    auto& pg = self.parents[1];
    auto& pb = self.parents[2];
    const T* xv = px.values().data();
    const T* gv = pg.values().data();
    std::vector<T> xhat(static_cast<std::size_t>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const T* row = xv + r * cols;
      const T* g = self.grad.data() + r * cols;
      double m = 0, v = 0;
      for (int j = 0; j < cols; ++j) m += row[j];
      m /= cols;
      for (int j = 0; j < cols; ++j) {
        const double c = row[j] - m;
        v += c * c;
      }
      v /= cols;
      const T mu = static_cast<T>(m);
      const T inv = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
      for (int j = 0; j < cols; ++j) xhat[j] = (row[j] - mu) * inv;
      if (pg.participates()) {
        auto& gg = pg.grad_buffer();
        for (int j = 0; j < cols; ++j) gg[j] += g[j] * xhat[j];
      }
      if (pb.participates()) {
        auto& gb = pb.grad_buffer();
        for (int j = 0; j < cols; ++j) gb[j] += g[j];
      }
      if (px.participates()) {
        double m1 = 0, m2 = 0;
        for (int j = 0; j < cols; ++j) {
          const double h = static_cast<double>(g[j]) * gv[j];
          m1 += h;
          m2 += h * xhat[j];
        }
        m1 /= cols;
        m2 /= cols;
        auto& gx = px.grad_buffer();
        T* gxr = gx.data() + r * cols;
        for (int j = 0; j < cols; ++j) {
          const double h = static_cast<double>(g[j]) * gv[j];
          gxr[j] += static_cast<T>(inv * (h - m1 - xhat[j] * m2));
        }
      }
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, std::vector<int> shape) {
  if (shape_numel(shape) != t.numel())
    throw std::invalid_argument("reshape: " + shape_str(t.shape()) + " -> " + shape_str(shape) +
                                " changes element count");
  std::vector<T> out(t.values());
  return make_op<T>(std::move(shape), std::move(out), {t}, [](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    kern::table<T>().axpy(self.grad.size(), T(1), self.grad.data(), p.grad_buffer().data());
  });
}

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<int>& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    s[i] = s[i + 1] * static_cast<std::size_t>(shape[i + 1]);
  return s;
}

// Visit every output index of `out_shape`, yielding the linear input offset
// under `in_stride_for_out_axis`.
template <typename Fn>
void odometer_walk(const std::vector<int>& out_shape, const std::vector<std::size_t>& in_stride, Fn&& fn) {
  const std::size_t total = shape_numel(out_shape);
  const std::size_t r = out_shape.size();
  std::vector<int> coord(r, 0);
  std::size_t in_idx = 0;
  for (std::size_t o = 0; o < total; ++o) {
    fn(o, in_idx);
    for (std::size_t ax = r; ax-- > 0;) {
      ++coord[ax];
      in_idx += in_stride[ax];
      if (coord[ax] < out_shape[ax]) break;
      in_idx -= in_stride[ax] * static_cast<std::size_t>(out_shape[ax]);
      coord[ax] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& t, const std::vector<int>& perm) {
  const auto& shape = t.shape();
  if (perm.size() != shape.size()) throw std::invalid_argument("permute: axis count mismatch");
  std::vector<bool> used(perm.size(), false);
  for (int ax : perm) {
    if (ax < 0 || ax >= static_cast<int>(perm.size()) || used[ax])
      throw std::invalid_argument("permute: invalid axis permutation");
    used[ax] = true;
  }
  std::vector<int> oshape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) oshape[i] = shape[perm[i]];
  const auto in_strides = row_major_strides(shape);
  std::vector<std::size_t> stride_for_out_axis(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) stride_for_out_axis[i] = in_strides[perm[i]];

  std::vector<T> out(t.numel());
  const T* src = t.values().data();
  odometer_walk(oshape, stride_for_out_axis, [&](std::size_t o, std::size_t in_idx) { out[o] = src[in_idx]; });

  return make_op<T>(std::move(oshape), std::move(out), {t},
                    [stride_for_out_axis](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    auto& g = p.grad_buffer();
    odometer_walk(self.shape, stride_for_out_axis,
                  [&](std::size_t o, std::size_t in_idx) { g[in_idx] += self.grad[o]; });
  });
}

template <typename T>
Tensor<T> slice_axis0(const Tensor<T>& t, int index) {
  if (t.rank() < 1) throw std::invalid_argument("slice_axis0: rank-0 input");
  const int extent = t.dim(0);
  if (index < 0 || index >= extent) throw std::invalid_argument("slice_axis0: index out of range");
  const std::vector<int> oshape(t.shape().begin() + 1, t.shape().end());
  const std::size_t block = t.numel() / static_cast<std::size_t>(extent);
  std::vector<T> out(block);
  std::memcpy(out.data(), t.values().data() + static_cast<std::size_t>(index) * block, block * sizeof(T));
  return make_op<T>(oshape, std::move(out), {t}, [index, block](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    kern::table<T>().axpy(block, T(1), self.grad.data(),
                          p.grad_buffer().data() + static_cast<std::size_t>(index) * block);
  });
}

template <typename T>
Tensor<T> concat_axis1(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("concat_axis1: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int B = a.dim(0), Ta = a.dim(1), Tb = b.dim(1), D = a.dim(2);
  std::vector<T> out(static_cast<std::size_t>(B) * (Ta + Tb) * D);
  const std::size_t arow = static_cast<std::size_t>(Ta) * D;
  const std::size_t brow = static_cast<std::size_t>(Tb) * D;
  for (int i = 0; i < B; ++i) {
    std::memcpy(out.data() + static_cast<std::size_t>(i) * (arow + brow), a.values().data() + i * arow,
                arow * sizeof(T));
    std::memcpy(out.data() + static_cast<std::size_t>(i) * (arow + brow) + arow,
                b.values().data() + i * brow, brow * sizeof(T));
  }
  return make_op<T>({B, Ta + Tb, D}, std::move(out), {a, b}, [B, arow, brow](TensorData<T>& self) {
    const auto& kk = kern::table<T>();
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (int i = 0; i < B; ++i) {
      const T* g = self.grad.data() + static_cast<std::size_t>(i) * (arow + brow);
      if (pa.participates()) kk.axpy(arow, T(1), g, pa.grad_buffer().data() + i * arow);
      if (pb.participates()) kk.axpy(brow, T(1), g + arow, pb.grad_buffer().data() + i * brow);
    }
  });
}

template <typename T>
Tensor<T> select_axis1(const Tensor<T>& t, int index) {
  if (t.rank() != 3) throw std::invalid_argument("select_axis1: need rank-3, got " + shape_str(t.shape()));
  const int B = t.dim(0), S = t.dim(1), D = t.dim(2);
  if (index < 0 || index >= S) throw std::invalid_argument("select_axis1: index out of range");
  std::vector<T> out(static_cast<std::size_t>(B) * D);
  for (int i = 0; i < B; ++i)
    std::memcpy(out.data() + static_cast<std::size_t>(i) * D,
                t.values().data() + (static_cast<std::size_t>(i) * S + index) * D, sizeof(T) * D);
  return make_op<T>({B, D}, std::move(out), {t}, [B, S, D, index](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    auto& g = p.grad_buffer();
    for (int i = 0; i < B; ++i)
      kern::table<T>().axpy(static_cast<std::size_t>(D), T(1),
                            self.grad.data() + static_cast<std::size_t>(i) * D,
                            g.data() + (static_cast<std::size_t>(i) * S + index) * D);
  });
}

template <typename T>
Tensor<T> scatter_add_cols(const Tensor<T>& base, const Tensor<T>& addend, const std::vector<int>& cols) {
  const int N = base.shape().back();
  const int K = addend.shape().back();
  if (static_cast<std::size_t>(K) != cols.size())
    throw std::invalid_argument("scatter_add_cols: addend width != column count");
  const std::size_t rows = base.numel() / static_cast<std::size_t>(N);
  if (addend.numel() / static_cast<std::size_t>(K) != rows)
    throw std::invalid_argument("scatter_add_cols: row counts differ");
  for (int c : cols)
    if (c < 0 || c >= N) throw std::invalid_argument("scatter_add_cols: column index out of range");

  std::vector<T> out(base.values());
  const T* av = addend.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    T* orow = out.data() + r * N;
    const T* arow = av + r * K;
    for (int i = 0; i < K; ++i) orow[cols[i]] += arow[i];
  }
  return make_op<T>(base.shape(), std::move(out), {base, addend},
                    [rows, N, K, cols](TensorData<T>& self) {
    const auto& kk = kern::table<T>();
    auto& pb = self.parents[0];
    auto& pa = self.parents[1];
    if (pb.participates())
      kk.axpy(self.grad.size(), T(1), self.grad.data(), pb.grad_buffer().data());
    if (pa.participates()) {
      auto& g = pa.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* grow = self.grad.data() + r * N;
        T* garow = g.data() + r * K;
        for (int i = 0; i < K; ++i) garow[i] += grow[cols[i]];
      }
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& t) {
  const T s = kern::table<T>().reduce_sum(t.numel(), t.values().data());
  return make_op<T>({1}, {s}, {t}, [](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    const T g = self.grad[0];
    auto& gp = p.grad_buffer();
    for (auto& v : gp) v += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& t) {
  return scale(sum(t), static_cast<T>(1.0 / static_cast<double>(t.numel())));
}

template <typename T>
Tensor<T> cross_entropy_mean(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw std::invalid_argument("cross_entropy: logits must be (batch, classes)");
  const int B = logits.dim(0), K = logits.dim(1);
  if (static_cast<std::size_t>(B) != labels.size())
    throw std::invalid_argument("cross_entropy: label count != batch size");
  for (int y : labels)
    if (y < 0 || y >= K) throw std::invalid_argument("cross_entropy: label out of range");

  const T* lv = logits.values().data();
  double total = 0;
  std::vector<double> lse(static_cast<std::size_t>(B));
  for (int r = 0; r < B; ++r) {
    const T* row = lv + static_cast<std::size_t>(r) * K;
    double mx = row[0];
    for (int j = 1; j < K; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double s = 0;
    for (int j = 0; j < K; ++j) s += std::exp(static_cast<double>(row[j]) - mx);
    lse[r] = std::log(s) + mx;
    total += lse[r] - static_cast<double>(row[labels[static_cast<std::size_t>(r)]]);
  }
  const T loss = static_cast<T>(total / B);
  return make_op<T>({1}, {loss}, {logits}, [B, K, labels, lse](TensorData<T>& self) {
    auto& p = self.parents[0];
    if (!p.participates()) return;
    const T g0 = self.grad[0];
    const T* lv = p.values().data();
    auto& g = p.grad_buffer();
    for (int r = 0; r < B; ++r) {
      const T* row = lv + static_cast<std::size_t>(r) * K;
      T* grow = g.data() + static_cast<std::size_t>(r) * K;
      for (int j = 0; j < K; ++j) {
        const double pj = std::exp(static_cast<double>(row[j]) - lse[static_cast<std::size_t>(r)]);
        const double onehot = (j == labels[static_cast<std::size_t>(r)]) ? 1.0 : 0.0;
        grow[j] += static_cast<T>((pj - onehot) * static_cast<double>(g0) / B);
      }
    }
  });
}

#define SPROUT_INSTANTIATE_OPS(T)                                                                \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                              \
  template Tensor<T> add_broadcast<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> expand_leading<T>(const Tensor<T>&, int);                                   \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                                  \
  template Tensor<T> softmax_lastdim<T>(const Tensor<T>&);                                       \
  template Tensor<T> layernorm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);      \
  template Tensor<T> reshape<T>(const Tensor<T>&, std::vector<int>);                             \
  template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<int>&);                      \
  template Tensor<T> slice_axis0<T>(const Tensor<T>&, int);                                      \
  template Tensor<T> concat_axis1<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> select_axis1<T>(const Tensor<T>&, int);                                     \
  template Tensor<T> scatter_add_cols<T>(const Tensor<T>&, const Tensor<T>&, const std::vector<int>&); \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                   \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                  \
  template Tensor<T> cross_entropy_mean<T>(const Tensor<T>&, const std::vector<int>&);

SPROUT_INSTANTIATE_OPS(float)
SPROUT_INSTANTIATE_OPS(double)

#undef SPROUT_INSTANTIATE_OPS

}  // namespace sprout::ops
