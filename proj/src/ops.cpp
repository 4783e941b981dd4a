// Copyright 2026 The MaIL Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mail/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "mail/kernels.h"

namespace mail {
namespace {

using Grads = std::span<std::vector<double>* const>;

Tensor make(Shape shape, std::vector<double> data, [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw ContractError(std::string(op) + " produced a non-finite value");
    }
  }
#endif
  return Tensor(std::move(shape), std::move(data));
}

// Checks that b's shape is a suffix of a's shape and returns b.numel().
std::size_t suffix_extent(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sb.size() <= sa.size();
  for (std::size_t i = 0; ok && i < sb.size(); ++i) {
    ok = sb[sb.size() - 1 - i] == sa[sa.size() - 1 - i];
  }
  if (!ok) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(sb) +
                         " onto " + to_string(sa));
  }
  return b.numel();
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, const char* name, F f, DF df) {
  const auto x = a.data();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Tensor out = make(a.shape(), std::move(y), name);
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, out, [a, out, df](std::span<const double> g, Grads gin) {
      const auto x = a.data();
      const auto y = out.data();
      auto& ga = *gin[0];
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

std::size_t product(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t i = from; i < to; ++i) n *= s[i];
  return n;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t inner = suffix_extent(a, b, "add");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i % inner];
  Tensor result = make(a.shape(), std::move(out), "add");
  if (auto* tape = GradientTape::recording({&a, &b})) {
    tape->record({&a, &b}, result, [inner](std::span<const double> g, Grads gin) {
      if (gin[0]) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
      }
      if (gin[1]) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i % inner] += g[i];
      }
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const std::size_t inner = suffix_extent(a, b, "sub");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i % inner];
  Tensor result = make(a.shape(), std::move(out), "sub");
  if (auto* tape = GradientTape::recording({&a, &b})) {
    tape->record({&a, &b}, result, [inner](std::span<const double> g, Grads gin) {
      if (gin[0]) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
      }
      if (gin[1]) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i % inner] -= g[i];
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t inner = suffix_extent(a, b, "mul");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i % inner];
  Tensor result = make(a.shape(), std::move(out), "mul");
  if (auto* tape = GradientTape::recording({&a, &b})) {
    tape->record({&a, &b}, result, [a, b, inner](std::span<const double> g, Grads gin) {
      const auto x = a.data();
      const auto y = b.data();
      if (gin[0]) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * y[i % inner];
      }
      if (gin[1]) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i % inner] += g[i] * x[i];
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; },
               [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; },
               [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, "softplus", stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
  return unary(a, "silu", [](double x) { return x * stable_sigmoid(x); },
               [](double x, double) {
                 const double s = stable_sigmoid(x);
                 return s * (1.0 + x * (1.0 - s));
               });
}

Tensor sum(const Tensor& a) {
  const auto x = a.data();
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  Tensor result = make({}, {total}, "sum");
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, result, [](std::span<const double> g, Grads gin) {
      for (double& v : *gin[0]) v += g[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const Shape& sx = x.shape();
  if (w.rank() != 2 || sx.empty() || sx.back() != w.dim(0)) {
    throw DimensionError("linear: input " + to_string(sx) + " does not match weight " +
                         to_string(w.shape()));
  }
  const std::size_t din = w.dim(0);
  const std::size_t dout = w.dim(1);
  if (b.defined() && (b.rank() != 1 || b.dim(0) != dout)) {
    throw DimensionError("linear: bias " + to_string(b.shape()) + " does not match " +
                         std::to_string(dout) + " outputs");
  }
  const std::size_t rows = x.numel() / din;
  std::vector<double> out(rows * dout, 0.0);
  if (b.defined()) {
    const auto bias = b.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(bias.begin(), bias.end(), out.begin() + static_cast<std::ptrdiff_t>(r * dout));
    }
  }
  kernels::gemm(x.data().data(), w.data().data(), out.data(), rows, din, dout);
  Shape shape = sx;
  shape.back() = dout;
  Tensor result = make(std::move(shape), std::move(out), "linear");
  if (auto* tape = GradientTape::recording({&x, &w, &b})) {
    tape->record({&x, &w, &b}, result,
                 [x, w, rows, din, dout](std::span<const double> g, Grads gin) {
                   if (gin[0]) kernels::gemm_nt(g.data(), w.data().data(), gin[0]->data(), rows, dout, din);
                   if (gin[1]) kernels::gemm_tn(x.data().data(), g.data(), gin[1]->data(), rows, din, dout);
                   if (gin[2]) {
                     auto& gb = *gin[2];
                     for (std::size_t r = 0; r < rows; ++r) {
                       for (std::size_t j = 0; j < dout; ++j) gb[j] += g[r * dout + j];
                     }
                   }
                 });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sa.size() != sb.size() ||
      !std::equal(sa.begin(), sa.end() - 2, sb.begin()) || sa[sa.size() - 1] != sb[sb.size() - 2]) {
    throw DimensionError("matmul: incompatible shapes " + to_string(sa) + " and " + to_string(sb));
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  const std::size_t batch = product(sa, 0, sa.size() - 2);
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    kernels::gemm(a.data().data() + i * m * k, b.data().data() + i * k * n,
                  out.data() + i * m * n, m, k, n);
  }
  Shape shape = sa;
  shape.back() = n;
  Tensor result = make(std::move(shape), std::move(out), "matmul");
  if (auto* tape = GradientTape::recording({&a, &b})) {
    tape->record({&a, &b}, result, [a, b, batch, m, k, n](std::span<const double> g, Grads gin) {
      for (std::size_t i = 0; i < batch; ++i) {
        const double* gi = g.data() + i * m * n;
        if (gin[0]) kernels::gemm_nt(gi, b.data().data() + i * k * n, gin[0]->data() + i * m * k, m, n, k);
        if (gin[1]) kernels::gemm_tn(a.data().data() + i * m * k, gi, gin[1]->data() + i * k * n, m, k, n);
      }
    });
  }
  return result;
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const Shape& sa = a.shape();
  const std::size_t rank = sa.size();
  std::vector<bool> seen(rank, false);
  if (axes.size() != rank) throw DimensionError("permute: axis list does not match rank");
  for (std::size_t ax : axes) {
    if (ax >= rank || seen[ax]) throw DimensionError("permute: invalid axis list");
    seen[ax] = true;
  }
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * sa[i];
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = sa[axes[i]];

  const std::size_t n = a.numel();
  std::vector<std::size_t> source(n);
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += counter[i] * in_stride[axes[i]];
    source[flat] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++counter[i] < out_shape[i]) break;
      counter[i] = 0;
    }
  }
  const auto x = a.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[source[i]];
  Tensor result = make(std::move(out_shape), std::move(out), "permute");
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, result, [source = std::move(source)](std::span<const double> g, Grads gin) {
      auto& ga = *gin[0];
      for (std::size_t i = 0; i < g.size(); ++i) ga[source[i]] += g[i];
    });
  }
  return result;
}

Tensor transpose_last2(const Tensor& a) {
  const std::size_t rank = a.rank();
  if (rank < 2) throw DimensionError("transpose_last2 needs rank >= 2");
  std::vector<std::size_t> axes(rank);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[rank - 1], axes[rank - 2]);
  return permute(a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (mail::numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  }
  const auto x = a.data();
  Tensor result = make(std::move(shape), std::vector<double>(x.begin(), x.end()), "reshape");
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, result, [](std::span<const double> g, Grads gin) {
      auto& ga = *gin[0];
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of no tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range");
  Shape shape = first;
  shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: " + to_string(s) + " does not match " + to_string(first) +
                           " off axis " + std::to_string(axis));
    }
    shape[axis] += s[axis];
  }
  const std::size_t outer = product(first, 0, axis);
  const std::size_t inner = product(first, axis + 1, first.size());
  const std::size_t out_row = shape[axis] * inner;
  std::vector<double> out(outer * out_row);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t row = p.dim(axis) * inner;
    const auto x = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * row), row,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_row + offset));
    }
    offsets.push_back(offset);
    offset += row;
  }
  Tensor result = make(std::move(shape), std::move(out), "concat");
  if (GradientTape* tape = GradientTape::active()) {
    bool tracked = false;
    for (const Tensor& p : parts) tracked = tracked || tape->tracks(p);
    if (tracked) {
      std::vector<std::size_t> rows;
      for (const Tensor& p : parts) rows.push_back(p.dim(axis) * inner);
      tape->record(parts, result, [outer, out_row, offsets, rows](std::span<const double> g, Grads gin) {
        for (std::size_t k = 0; k < gin.size(); ++k) {
          if (!gin[k]) continue;
          auto& gk = *gin[k];
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < rows[k]; ++i) {
              gk[o * rows[k] + i] += g[o * out_row + offsets[k] + i];
            }
          }
        }
      });
    }
  }
  return result;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& sa = a.shape();
  if (axis >= sa.size() || start + length > sa[axis]) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for axis " + std::to_string(axis) + " of " + to_string(sa));
  }
  const std::size_t outer = product(sa, 0, axis);
  const std::size_t inner = product(sa, axis + 1, sa.size());
  const std::size_t in_row = sa[axis] * inner;
  const std::size_t out_row = length * inner;
  const std::size_t skip = start * inner;
  const auto x = a.data();
  std::vector<double> out(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * in_row + skip), out_row,
                out.begin() + static_cast<std::ptrdiff_t>(o * out_row));
  }
  Shape shape = sa;
  shape[axis] = length;
  Tensor result = make(std::move(shape), std::move(out), "slice");
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, result, [outer, in_row, out_row, skip](std::span<const double> g, Grads gin) {
      auto& ga = *gin[0];
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < out_row; ++i) ga[o * in_row + skip + i] += g[o * out_row + i];
      }
    });
  }
  return result;
}

Tensor expand_last(const Tensor& a, std::size_t width) {
  const Shape& sa = a.shape();
  if (sa.empty() || sa.back() != 1) {
    throw DimensionError("expand_last needs a trailing extent of 1, got " + to_string(sa));
  }
  const auto x = a.data();
  std::vector<double> out(x.size() * width);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i * width), width, x[i]);
  }
  Shape shape = sa;
  shape.back() = width;
  Tensor result = make(std::move(shape), std::move(out), "expand_last");
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, result, [width](std::span<const double> g, Grads gin) {
      auto& ga = *gin[0];
      for (std::size_t i = 0; i < ga.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < width; ++j) s += g[i * width + j];
        ga[i] += s;
      }
    });
  }
  return result;
}

Tensor broadcast_leading(const Tensor& a, const Shape& leading) {
  const std::size_t reps = mail::numel(leading);
  const auto x = a.data();
  std::vector<double> out(reps * x.size());
  for (std::size_t r = 0; r < reps; ++r) {
    std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(r * x.size()));
  }
  Shape shape = leading;
  shape.insert(shape.end(), a.shape().begin(), a.shape().end());
  Tensor result = make(std::move(shape), std::move(out), "broadcast_leading");
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, result, [](std::span<const double> g, Grads gin) {
      auto& ga = *gin[0];
      for (std::size_t i = 0; i < g.size(); ++i) ga[i % ga.size()] += g[i];
    });
  }
  return result;
}

Tensor softmax_last(const Tensor& a, bool causal) {
  const Shape& sa = a.shape();
  if (sa.empty() || sa.back() == 0) throw DimensionError("softmax over an empty axis");
  const std::size_t keys = sa.back();
  std::size_t queries = 1;
  if (causal) {
    if (sa.size() < 2 || sa[sa.size() - 2] > keys) {
      throw DimensionError("causal softmax needs [..., queries, keys] with queries <= keys");
    }
    queries = sa[sa.size() - 2];
  }
  const std::size_t offset = keys - queries;
  const std::size_t rows = a.numel() / keys;
  const auto x = a.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t visible = causal ? (r % queries) + offset + 1 : keys;
    const double* xr = x.data() + r * keys;
    double* yr = out.data() + r * keys;
    const double peak = *std::max_element(xr, xr + visible);
    double total = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      yr[j] = std::exp(xr[j] - peak);
      total += yr[j];
    }
    for (std::size_t j = 0; j < visible; ++j) yr[j] /= total;
  }
  Tensor result = make(sa, std::move(out), "softmax_last");
  if (auto* tape = GradientTape::recording({&a})) {
    tape->record({&a}, result, [result, rows, keys](std::span<const double> g, Grads gin) {
      const auto y = result.data();
      auto& ga = *gin[0];
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < keys; ++j) dot += g[r * keys + j] * y[r * keys + j];
        for (std::size_t j = 0; j < keys; ++j) {
          ga[r * keys + j] += y[r * keys + j] * (g[r * keys + j] - dot);
        }
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Shape& sx = x.shape();
  if (sx.empty() || sx.back() == 0) throw DimensionError("layer_norm needs a nonempty trailing axis");
  const std::size_t width = sx.back();
  if (gamma.shape() != Shape{width} || beta.shape() != Shape{width}) {
    throw DimensionError("layer_norm: gamma/beta must have shape [" + std::to_string(width) + "]");
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / width;
  const auto in = x.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  std::vector<double> normed(in.size());
  std::vector<double> rstd(rows);
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += xr[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(width);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
      const double xh = (xr[j] - mu) * rstd[r];
      normed[r * width + j] = xh;
      out[r * width + j] = xh * gm[j] + bt[j];
    }
  }
  Tensor result = make(sx, std::move(out), "layer_norm");
  if (auto* tape = GradientTape::recording({&x, &gamma, &beta})) {
    tape->record({&x, &gamma, &beta}, result,
                 [gamma, normed = std::move(normed), rstd = std::move(rstd), rows, width](
                     std::span<const double> g, Grads gin) {
                   const auto gm = gamma.data();
                   const double inv_w = 1.0 / static_cast<double>(width);
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* gr = g.data() + r * width;
                     const double* xh = normed.data() + r * width;
                     if (gin[0]) {
                       double mean_d = 0.0;
                       double mean_dx = 0.0;
                       for (std::size_t j = 0; j < width; ++j) {
                         const double d = gr[j] * gm[j];
                         mean_d += d;
                         mean_dx += d * xh[j];
                       }
                       mean_d *= inv_w;
                       mean_dx *= inv_w;
                       auto& gx = *gin[0];
                       for (std::size_t j = 0; j < width; ++j) {
                         gx[r * width + j] += rstd[r] * (gr[j] * gm[j] - mean_d - xh[j] * mean_dx);
                       }
                     }
                     if (gin[1]) {
                       for (std::size_t j = 0; j < width; ++j) (*gin[1])[j] += gr[j] * xh[j];
                     }
                     if (gin[2]) {
                       for (std::size_t j = 0; j < width; ++j) (*gin[2])[j] += gr[j];
                     }
                   }
                 });
  }
  return result;
}

Tensor causal_depthwise_conv(const Tensor& x, const Tensor& taps, const Tensor& bias) {
  const Shape& sx = x.shape();
  if (sx.size() < 2) throw DimensionError("causal_depthwise_conv needs [..., L, D] input");
  const std::size_t channels = sx.back();
  const std::size_t length = sx[sx.size() - 2];
  if (taps.rank() != 2 || taps.dim(1) != channels || taps.dim(0) == 0) {
    throw DimensionError("causal_depthwise_conv: kernels " + to_string(taps.shape()) +
                         " do not match " + std::to_string(channels) + " channels");
  }
  if (bias.shape() != Shape{channels}) {
    throw DimensionError("causal_depthwise_conv: bias must have shape [" + std::to_string(channels) + "]");
  }
  const std::size_t width = taps.dim(0);
  const std::size_t batch = length == 0 ? 0 : x.numel() / (length * channels);
  std::vector<double> out(x.numel());
  kernels::causal_conv(x.data().data(), taps.data().data(), bias.data().data(), out.data(),
                       batch, length, channels, width);
  Tensor result = make(sx, std::move(out), "causal_depthwise_conv");
  if (auto* tape = GradientTape::recording({&x, &taps, &bias})) {
    tape->record({&x, &taps, &bias}, result,
                 [x, taps, batch, length, channels, width](std::span<const double> g, Grads gin) {
                   kernels::causal_conv_backward(
                       x.data().data(), taps.data().data(), g.data(),
                       gin[0] ? gin[0]->data() : nullptr, gin[1] ? gin[1]->data() : nullptr,
                       gin[2] ? gin[2]->data() : nullptr, batch, length, channels, width);
                 });
  }
  return result;
}

Tensor batch_squared_error(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape() || prediction.rank() == 0) {
    throw DimensionError("batch_squared_error: " + to_string(prediction.shape()) + " vs " +
                         to_string(target.shape()));
  }
  const Tensor diff = sub(prediction, target);
  return scale(sum(mul(diff, diff)), 1.0 / static_cast<double>(prediction.dim(0)));
}

}  // namespace mail
