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

#include "mail/layers.h"

#include <cmath>

#include "mail/ops.h"

namespace mail {

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.w = uniform_parameter({in, out}, bound, rng);
  if (bias) l.b = uniform_parameter({out}, bound, rng);
  return l;
}

Tensor Linear::apply(const Tensor& x) const { return linear(x, w, b); }

void Linear::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + "w", w);
  if (b.defined()) out.add(prefix + "b", b);
}

FeedForward FeedForward::init(std::size_t in, std::size_t width, std::size_t out, Rng& rng) {
  return {Linear::init(in, width, rng), Linear::init(width, out, rng)};
}

Tensor FeedForward::apply(const Tensor& x) const { return output.apply(silu(hidden.apply(x))); }

void FeedForward::collect(ParameterList& out, const std::string& prefix) const {
  hidden.collect(out, prefix + "hidden.");
  output.collect(out, prefix + "output.");
}

MultiHeadAttention MultiHeadAttention::init(std::size_t model_dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || model_dim % heads != 0) {
    throw ContractError("attention: model_dim " + std::to_string(model_dim) +
                        " is not divisible by heads " + std::to_string(heads));
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(model_dim));
  MultiHeadAttention m;
  m.heads = heads;
  m.w_q = uniform_parameter({model_dim, model_dim}, bound, rng);
  m.w_k = uniform_parameter({model_dim, model_dim}, bound, rng);
  m.w_v = uniform_parameter({model_dim, model_dim}, bound, rng);
  m.w_o = Linear::init(model_dim, model_dim, rng);
  return m;
}

namespace {

// [B, L, D] -> [B, H, L, D/H]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t b = x.dim(0), l = x.dim(1), d = x.dim(2);
  return permute(reshape(x, {b, l, heads, d / heads}), {0, 2, 1, 3});
}

Tensor merge_heads(const Tensor& x) {
  const std::size_t b = x.dim(0), h = x.dim(1), l = x.dim(2), dh = x.dim(3);
  return reshape(permute(x, {0, 2, 1, 3}), {b, l, h * dh});
}

void require_tokens(const Tensor& x, std::size_t width, const char* what) {
  if (x.rank() != 3 || x.dim(2) != width) {
    throw DimensionError(std::string("attention: ") + what + " must be [B, L, " +
                         std::to_string(width) + "], got " + to_string(x.shape()));
  }
}

}  // namespace

Tensor MultiHeadAttention::weights(const Tensor& queries, const Tensor& keys, bool causal) const {
  const std::size_t d = w_q.dim(0);
  require_tokens(queries, d, "queries");
  require_tokens(keys, d, "keys");
  if (queries.dim(0) != keys.dim(0)) throw DimensionError("attention: batch mismatch");
  const Tensor q = split_heads(linear(queries, w_q), heads);
  const Tensor k = split_heads(linear(keys, w_k), heads);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d / heads));
  return softmax_last(scale(matmul(q, transpose_last2(k)), inv), causal);
}

Tensor MultiHeadAttention::forward(const Tensor& queries, const Tensor& keys, bool causal) const {
  const Tensor p = weights(queries, keys, causal);
  const Tensor v = split_heads(linear(keys, w_v), heads);
  return w_o.apply(merge_heads(matmul(p, v)));
}

void MultiHeadAttention::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + "w_q", w_q);
  out.add(prefix + "w_k", w_k);
  out.add(prefix + "w_v", w_v);
  w_o.collect(out, prefix + "w_o.");
}

TransformerLayer TransformerLayer::init(std::size_t model_dim, std::size_t heads,
                                        std::size_t ff_dim, bool cross, Rng& rng) {
  TransformerLayer t;
  t.self_norm = NormParams::init(model_dim);
  t.self_attention = MultiHeadAttention::init(model_dim, heads, rng);
  t.has_cross = cross;
  if (cross) {
    t.cross_norm = NormParams::init(model_dim);
    t.cross_attention = MultiHeadAttention::init(model_dim, heads, rng);
  }
  t.ff_norm = NormParams::init(model_dim);
  t.ff = FeedForward::init(model_dim, ff_dim, model_dim, rng);
  return t;
}

Tensor TransformerLayer::forward(const Tensor& x, const Tensor& memory, bool causal) const {
  const Tensor n = self_norm.apply(x);
  Tensor h = add(x, self_attention.forward(n, n, causal));
  if (has_cross) {
    if (!memory.defined()) throw ContractError("transformer: cross attention needs a memory");
    h = add(h, cross_attention.forward(cross_norm.apply(h), memory, false));
  }
  return add(h, ff.apply(ff_norm.apply(h)));
}

void TransformerLayer::collect(ParameterList& out, const std::string& prefix) const {
  self_norm.collect(out, prefix + "self_norm.");
  self_attention.collect(out, prefix + "self_attention.");
  if (has_cross) {
    cross_norm.collect(out, prefix + "cross_norm.");
    cross_attention.collect(out, prefix + "cross_attention.");
  }
  ff_norm.collect(out, prefix + "ff_norm.");
  ff.collect(out, prefix + "ff.");
}

TransformerStack TransformerStack::init(std::size_t model_dim, std::size_t depth,
                                        std::size_t heads, std::size_t ff_dim, bool causal,
                                        bool cross, Rng& rng) {
  TransformerStack s;
  s.causal = causal;
  for (std::size_t i = 0; i < depth; ++i) {
    s.layers.push_back(TransformerLayer::init(model_dim, heads, ff_dim, cross, rng));
  }
  s.final_norm = NormParams::init(model_dim);
  return s;
}

Tensor TransformerStack::forward(const Tensor& x, const Tensor& memory) const {
  Tensor h = x;
  for (const auto& layer : layers) h = layer.forward(h, memory, causal);
  return final_norm.apply(h);
}

void TransformerStack::collect(ParameterList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(out, prefix + "layer" + std::to_string(i) + ".");
  }
  final_norm.collect(out, prefix + "final_norm.");
}

}  // namespace mail
