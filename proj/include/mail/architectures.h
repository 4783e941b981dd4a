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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mail/layers.h"
#include "mail/mamba.h"
#include "mail/params.h"
#include "mail/rng.h"
#include "mail/ssm.h"
#include "mail/tensor.h"

namespace mail {

enum class Variant { kDMa, kEDMa, kDTr, kEDTr };

/// Accepts "D-Ma", "ED-Ma", "D-Tr", "ED-Tr" (case-insensitive, '-' optional).
Variant parse_variant(const std::string& name);
std::string to_string(Variant v);
bool is_mamba(Variant v);
bool is_encoder_decoder(Variant v);

/// Token stream [time; K observations; J actions]. Observation i (oldest
/// first) sits at environment offset i - (K - 1) relative to the current step
/// and action j at offset j, so the current observation and the first action
/// share a positional index.
struct SequenceLayout {
  std::size_t history = 1;
  std::size_t horizon = 1;

  std::size_t length() const { return 1 + history + horizon; }
  std::vector<std::size_t> observation_positions() const;
  std::vector<std::size_t> action_positions() const;
  void validate() const;
};

struct PolicyNetworkConfig {
  Variant variant = Variant::kDMa;
  std::size_t model_dim = 16;
  std::size_t state_dim = 8;
  std::size_t conv_width = 4;
  std::size_t depth = 2;
  std::size_t encoder_depth = 1;
  std::size_t decoder_depth = 1;
  std::size_t heads = 2;
  std::size_t ff_dim = 44;
  std::size_t history = 1;
  std::size_t horizon = 1;
  std::size_t obs_dim = 1;
  std::size_t cond_dim = 0;
  std::size_t act_dim = 1;
  std::size_t diffusion_steps = 16;
  ScanMode scan_mode = ScanMode::kParallel;

  SequenceLayout layout() const { return {history, horizon}; }
  MambaBlockConfig mamba() const { return {model_dim, state_dim, conv_width, 2}; }
  /// Width of each observation row fed to the network (obs_dim + cond_dim).
  std::size_t obs_input_dim() const { return obs_dim + cond_dim; }
  void validate() const;
};

/// Row p holds sin(p w_i), cos(p w_i) interleaved, w_i = 10000^(-2i / width).
Tensor sinusoidal_table(const std::vector<std::size_t>& positions, std::size_t width);

/// tokens [..., L', D] plus the fixed sinusoidal row of each index.
Tensor apply_positional_encoding(const Tensor& tokens, const std::vector<std::size_t>& positions);

struct TimeEmbedding {
  std::size_t steps = 16;
  Linear projection;

  static TimeEmbedding init(std::size_t steps, std::size_t model_dim, Rng& rng);
  /// One [1, D] token per entry of `t`, stacked to [B, 1, D].
  Tensor apply(const std::vector<std::size_t>& t) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// [1, D] embedding of a single diffusion step.
Tensor time_embedding(const TimeEmbedding& te, std::size_t t);

/// Two-layer MLP shared across history positions.
struct ObservationEncoder {
  FeedForward mlp;

  static ObservationEncoder init(std::size_t input_dim, std::size_t model_dim, Rng& rng);
  Tensor apply(const Tensor& obs) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct AlignmentTokens {
  Tensor a_hat;  // [J, D]
  Tensor s_hat;  // [K, D]
  Tensor t_hat;  // [1, D]

  static AlignmentTokens init(std::size_t history, std::size_t horizon, std::size_t model_dim,
                              Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct ParameterCount {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_module;
};

/// Noise-prediction network shared by every variant. Inputs are batched
/// s_hist [B, K, obs_in], a_noisy [B, J, act] with one diffusion step per row;
/// unbatched [K, obs_in] / [J, act] inputs give an unbatched [J, act] result.
class DenoisingNetwork {
 public:
  virtual ~DenoisingNetwork() = default;

  const PolicyNetworkConfig& config() const { return config_; }
  Tensor forward(const Tensor& s_hist, const Tensor& a_noisy,
                 const std::vector<std::size_t>& t) const;
  Tensor forward(const Tensor& s_hist, const Tensor& a_noisy, std::size_t t) const;
  /// Final backbone features of the first action slot, [B, D].
  Tensor latent(const Tensor& s_hist, const Tensor& a_noisy,
                const std::vector<std::size_t>& t) const;

  ParameterList parameters() const;

  ObservationEncoder obs_encoder;
  Linear action_encoder;
  TimeEmbedding time;
  Linear head;

 protected:
  explicit DenoisingNetwork(const PolicyNetworkConfig& cfg, Rng& rng);
  /// Backbone outputs for the J action slots, [B, J, D].
  virtual Tensor action_features(const Tensor& s_hist, const Tensor& a_noisy,
                                 const std::vector<std::size_t>& t) const = 0;
  virtual void collect_backbone(ParameterList& out) const = 0;

  /// Shared token builders.
  Tensor time_tokens(const std::vector<std::size_t>& t) const;
  Tensor observation_tokens(const Tensor& s_hist) const;
  Tensor action_tokens(const Tensor& a_noisy) const;

  PolicyNetworkConfig config_;

 private:
  Tensor batched_features(const Tensor& s_hist, const Tensor& a_noisy,
                          const std::vector<std::size_t>& t, bool& batched) const;
};

class DMaNetwork final : public DenoisingNetwork {
 public:
  DMaNetwork(const PolicyNetworkConfig& cfg, Rng& rng);
  MambaStack backbone;

 protected:
  Tensor action_features(const Tensor& s_hist, const Tensor& a_noisy,
                         const std::vector<std::size_t>& t) const override;
  void collect_backbone(ParameterList& out) const override;
};

class EDMaNetwork final : public DenoisingNetwork {
 public:
  EDMaNetwork(const PolicyNetworkConfig& cfg, Rng& rng);
  MambaStack encoder;
  MambaStack decoder;
  AlignmentTokens alignment;

  /// Encoder stream [TE; PE(obs); a_hat] and first-decoder stream
  /// [t_hat; s_hat; PE(act)], both [B, 1 + K + J, D].
  Tensor encoder_stream(const Tensor& s_hist, const std::vector<std::size_t>& t) const;
  Tensor decoder_stream(const Tensor& a_noisy) const;

 protected:
  Tensor action_features(const Tensor& s_hist, const Tensor& a_noisy,
                         const std::vector<std::size_t>& t) const override;
  void collect_backbone(ParameterList& out) const override;
};

class DTrNetwork final : public DenoisingNetwork {
 public:
  DTrNetwork(const PolicyNetworkConfig& cfg, Rng& rng);
  TransformerStack backbone;

 protected:
  Tensor action_features(const Tensor& s_hist, const Tensor& a_noisy,
                         const std::vector<std::size_t>& t) const override;
  void collect_backbone(ParameterList& out) const override;
};

class EDTrNetwork final : public DenoisingNetwork {
 public:
  EDTrNetwork(const PolicyNetworkConfig& cfg, Rng& rng);
  TransformerStack encoder;
  TransformerStack decoder;

 protected:
  Tensor action_features(const Tensor& s_hist, const Tensor& a_noisy,
                         const std::vector<std::size_t>& t) const override;
  void collect_backbone(ParameterList& out) const override;
};

std::unique_ptr<DenoisingNetwork> make_network(const PolicyNetworkConfig& cfg, Rng& rng);

Tensor d_ma_forward(const DMaNetwork& net, const Tensor& s_hist, const Tensor& a_noisy,
                    std::size_t t);
Tensor ed_ma_forward(const EDMaNetwork& net, const Tensor& s_hist, const Tensor& a_noisy,
                     std::size_t t);
Tensor attention_baseline_forward(const DenoisingNetwork& net, const Tensor& s_hist,
                                  const Tensor& a_noisy, std::size_t t);

ParameterCount count_parameters(const DenoisingNetwork& net);
ParameterCount count_parameters(const ParameterList& params);

}  // namespace mail
