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

#include "mail/mamba.h"

#include <cmath>
#include <stdexcept>

#include "mail/ops.h"

namespace mail {

void MambaBlockConfig::validate() const {
  if (model_dim == 0 || state_dim == 0 || conv_width == 0) {
    throw std::invalid_argument("mamba block dims must be positive");
  }
  if (expand != 2) throw std::invalid_argument("mamba expand factor is fixed at 2");
}

std::size_t mamba_block_parameter_count(const MambaBlockConfig& cfg) {
  const std::size_t d = cfg.inner_dim();
  return 2 * cfg.model_dim * d + cfg.conv_width * d + d + 3 * d * cfg.state_dim + 2 * d +
         d * cfg.model_dim;
}

MambaBlock MambaBlock::init(const MambaBlockConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t dm = cfg.model_dim;
  const std::size_t d = cfg.inner_dim();
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(dm));
  MambaBlock b;
  b.w_in = uniform_parameter({dm, d}, in_bound, rng);
  b.w_gate = uniform_parameter({dm, d}, in_bound, rng);
  b.conv_kernel = uniform_parameter({cfg.conv_width, d},
                                    1.0 / std::sqrt(static_cast<double>(cfg.conv_width)), rng);
  b.conv_bias = constant_parameter({d}, 0.0);
  b.ssm = SelectiveSsmParams::init(d, cfg.state_dim, rng);
  b.w_out = constant_parameter({d, dm}, 0.0);
  return b;
}

Tensor MambaBlock::forward(const Tensor& x, ScanMode mode) const {
  const Tensor u = linear(x, w_in);
  const Tensor g = linear(x, w_gate);
  const Tensor v = silu(causal_depthwise_conv(u, conv_kernel, conv_bias));
  const Tensor y = selective_ssm_forward(v, ssm, mode);
  return linear(mul(y, silu(g)), w_out);
}

void MambaBlock::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + "w_in", w_in);
  out.add(prefix + "w_gate", w_gate);
  out.add(prefix + "conv_kernel", conv_kernel);
  out.add(prefix + "conv_bias", conv_bias);
  ssm.collect(out, prefix + "ssm.");
  out.add(prefix + "w_out", w_out);
}

Tensor mamba_block_forward(const Tensor& x, const MambaBlock& block, ScanMode mode) {
  return block.forward(x, mode);
}

NormParams NormParams::init(std::size_t width) {
  return {constant_parameter({width}, 1.0), constant_parameter({width}, 0.0)};
}

Tensor NormParams::apply(const Tensor& x) const { return layer_norm(x, gamma, beta); }

void NormParams::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + "gamma", gamma);
  out.add(prefix + "beta", beta);
}

MambaStack MambaStack::init(const MambaBlockConfig& cfg, std::size_t depth, Rng& rng,
                            ScanMode mode) {
  MambaStack s;
  s.config = cfg;
  s.mode = mode;
  for (std::size_t i = 0; i < depth; ++i) {
    s.norms.push_back(NormParams::init(cfg.model_dim));
    s.blocks.push_back(MambaBlock::init(cfg, rng));
  }
  s.final_norm = NormParams::init(cfg.model_dim);
  return s;
}

Tensor MambaStack::run_layers(const Tensor& x, std::size_t first, std::size_t last) const {
  Tensor h = x;
  for (std::size_t i = first; i < last; ++i) {
    h = add(h, blocks[i].forward(norms[i].apply(h), mode));
  }
  return h;
}

Tensor MambaStack::forward(const Tensor& x) const {
  return final_norm.apply(run_layers(x, 0, depth()));
}

void MambaStack::collect(ParameterList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = prefix + "layer" + std::to_string(i) + ".";
    norms[i].collect(out, p + "norm.");
    blocks[i].collect(out, p + "mamba.");
  }
  final_norm.collect(out, prefix + "final_norm.");
}

Tensor mamba_stack_forward(const Tensor& x, const MambaStack& stack) { return stack.forward(x); }

}  // namespace mail
