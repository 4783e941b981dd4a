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

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mail/mamba.h"
#include "mail/params.h"
#include "mail/rng.h"
#include "mail/tensor.h"

namespace mail {

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out], undefined without bias

  /// Weights and bias uniform in +-1/sqrt(in).
  static Linear init(std::size_t in, std::size_t out, Rng& rng, bool bias = true);
  Tensor apply(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// Two linear maps with a SiLU between them.
struct FeedForward {
  Linear hidden;
  Linear output;

  static FeedForward init(std::size_t in, std::size_t width, std::size_t out, Rng& rng);
  Tensor apply(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct MultiHeadAttention {
  std::size_t heads = 1;
  Tensor w_q;  // [D, D]
  Tensor w_k;
  Tensor w_v;
  Linear w_o;

  static MultiHeadAttention init(std::size_t model_dim, std::size_t heads, Rng& rng);
  /// Attention probabilities [B, H, Lq, Lk] for queries [B, Lq, D] over keys [B, Lk, D].
  Tensor weights(const Tensor& queries, const Tensor& keys, bool causal) const;
  Tensor forward(const Tensor& queries, const Tensor& keys, bool causal) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// Pre-norm block: x + SelfAttn(LN x), then x + CrossAttn(LN x, memory) when
/// the layer has a memory, then x + FF(LN x).
struct TransformerLayer {
  NormParams self_norm;
  MultiHeadAttention self_attention;
  bool has_cross = false;
  NormParams cross_norm;
  MultiHeadAttention cross_attention;
  NormParams ff_norm;
  FeedForward ff;

  static TransformerLayer init(std::size_t model_dim, std::size_t heads, std::size_t ff_dim,
                               bool cross, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor& memory, bool causal) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct TransformerStack {
  std::vector<TransformerLayer> layers;
  NormParams final_norm;
  bool causal = true;

  static TransformerStack init(std::size_t model_dim, std::size_t depth, std::size_t heads,
                               std::size_t ff_dim, bool causal, bool cross, Rng& rng);
  /// x: [B, L, D]; memory is required exactly when the layers have cross attention.
  Tensor forward(const Tensor& x, const Tensor& memory = Tensor()) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

}  // namespace mail
