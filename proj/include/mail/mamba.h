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

#include "mail/params.h"
#include "mail/rng.h"
#include "mail/ssm.h"
#include "mail/tensor.h"

namespace mail {

struct MambaBlockConfig {
  std::size_t model_dim = 64;
  std::size_t state_dim = 8;
  std::size_t conv_width = 4;
  std::size_t expand = 2;

  std::size_t inner_dim() const { return expand * model_dim; }
  void validate() const;
};

/// Trainable scalars in one block (without its LayerNorm). With
/// D = expand * model_dim:
///   2 * model_dim * D      input and gate projections
///   conv_width * D + D     depthwise conv taps and bias
///   3 * D * state_dim      a_log, w_b, w_c
///   2 * D                  w_delta and b_delta
///   D * model_dim          output projection
std::size_t mamba_block_parameter_count(const MambaBlockConfig& cfg);

/// One gated block: expand, causal depthwise conv, SiLU, selective SSM, SiLU
/// gate, contract.
struct MambaBlock {
  Tensor w_in;         // [D_m, D] -> u
  Tensor w_gate;       // [D_m, D] -> g
  Tensor conv_kernel;  // [W, D]
  Tensor conv_bias;    // [D]
  SelectiveSsmParams ssm;
  Tensor w_out;        // [D, D_m]

  /// Fan-in uniform projections; zero output projection so a fresh stack is
  /// the identity up to its norms.
  static MambaBlock init(const MambaBlockConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& x, ScanMode mode) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

Tensor mamba_block_forward(const Tensor& x, const MambaBlock& block, ScanMode mode);

struct NormParams {
  Tensor gamma;
  Tensor beta;

  static NormParams init(std::size_t width);
  Tensor apply(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// Pre-norm residual tower: x <- x + block(LN(x)) per layer, then a final LN.
struct MambaStack {
  MambaBlockConfig config;
  std::vector<NormParams> norms;
  std::vector<MambaBlock> blocks;
  NormParams final_norm;
  ScanMode mode = ScanMode::kParallel;

  static MambaStack init(const MambaBlockConfig& cfg, std::size_t depth, Rng& rng,
                         ScanMode mode = ScanMode::kParallel);
  std::size_t depth() const { return blocks.size(); }
  /// Runs layers [first, last) without the final norm.
  Tensor run_layers(const Tensor& x, std::size_t first, std::size_t last) const;
  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

Tensor mamba_stack_forward(const Tensor& x, const MambaStack& stack);

}  // namespace mail
