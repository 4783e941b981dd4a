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

#include "mail/architectures.h"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mail/ops.h"

namespace mail {

Variant parse_variant(const std::string& name) {
  std::string key;
  for (char c : name) {
    if (c != '-' && c != '_') key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "dma") return Variant::kDMa;
  if (key == "edma") return Variant::kEDMa;
  if (key == "dtr") return Variant::kDTr;
  if (key == "edtr") return Variant::kEDTr;
  throw ContractError("unknown variant '" + name + "' (expected D-Ma, ED-Ma, D-Tr or ED-Tr)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kDMa: return "D-Ma";
    case Variant::kEDMa: return "ED-Ma";
    case Variant::kDTr: return "D-Tr";
    case Variant::kEDTr: return "ED-Tr";
  }
  return "?";
}

bool is_mamba(Variant v) { return v == Variant::kDMa || v == Variant::kEDMa; }
bool is_encoder_decoder(Variant v) { return v == Variant::kEDMa || v == Variant::kEDTr; }

std::vector<std::size_t> SequenceLayout::observation_positions() const {
  std::vector<std::size_t> p(history);
  for (std::size_t i = 0; i < history; ++i) p[i] = i;
  return p;
}

std::vector<std::size_t> SequenceLayout::action_positions() const {
  std::vector<std::size_t> p(horizon);
  for (std::size_t j = 0; j < horizon; ++j) p[j] = history - 1 + j;
  return p;
}

void SequenceLayout::validate() const {
  if (history == 0 || horizon == 0) {
    throw ContractError("layout: history and horizon must be >= 1");
  }
}

void PolicyNetworkConfig::validate() const {
  layout().validate();
  if (model_dim == 0 || obs_dim == 0 || act_dim == 0) {
    throw ContractError("network: model_dim, obs_dim and act_dim must be positive");
  }
  if (diffusion_steps == 0) throw ContractError("network: diffusion_steps must be positive");
  if (is_encoder_decoder(variant) && (encoder_depth == 0 || decoder_depth == 0)) {
    throw ContractError("network: " + to_string(variant) +
                        " needs encoder_depth and decoder_depth > 0");
  }
  if (is_mamba(variant)) {
    mamba().validate();
  } else {
    if (heads == 0 || model_dim % heads != 0) {
      throw ContractError("network: model_dim must be divisible by heads");
    }
    if (ff_dim == 0) throw ContractError("network: ff_dim must be positive");
  }
}

Tensor sinusoidal_table(const std::vector<std::size_t>& positions, std::size_t width) {
  std::vector<double> v(positions.size() * width);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const double p = static_cast<double>(positions[r]);
    for (std::size_t c = 0; c < width; ++c) {
      const double freq = std::pow(10000.0, -static_cast<double>(c - c % 2) / width);
      v[r * width + c] = c % 2 == 0 ? std::sin(p * freq) : std::cos(p * freq);
    }
  }
  return Tensor({positions.size(), width}, std::move(v));
}

Tensor apply_positional_encoding(const Tensor& tokens, const std::vector<std::size_t>& positions) {
  if (tokens.rank() < 2 || tokens.dim(tokens.rank() - 2) != positions.size()) {
    throw DimensionError("positional encoding: " + std::to_string(positions.size()) +
                         " indices for tokens " + to_string(tokens.shape()));
  }
  return add(tokens, sinusoidal_table(positions, tokens.dim(tokens.rank() - 1)));
}

TimeEmbedding TimeEmbedding::init(std::size_t steps, std::size_t model_dim, Rng& rng) {
  return {steps, Linear::init(model_dim, model_dim, rng)};
}

Tensor TimeEmbedding::apply(const std::vector<std::size_t>& t) const {
  for (std::size_t s : t) {
    if (s < 1 || s > steps) {
      throw ContractError("time embedding: step " + std::to_string(s) + " outside [1, " +
                          std::to_string(steps) + "]");
    }
  }
  const std::size_t d = projection.w.dim(0);
  return projection.apply(reshape(sinusoidal_table(t, d), {t.size(), 1, d}));
}

void TimeEmbedding::collect(ParameterList& out, const std::string& prefix) const {
  projection.collect(out, prefix + "projection.");
}

Tensor time_embedding(const TimeEmbedding& te, std::size_t t) {
  const Tensor e = te.apply({t});
  return reshape(e, {1, e.dim(2)});
}

ObservationEncoder ObservationEncoder::init(std::size_t input_dim, std::size_t model_dim,
                                            Rng& rng) {
  return {FeedForward::init(input_dim, model_dim, model_dim, rng)};
}

Tensor ObservationEncoder::apply(const Tensor& obs) const { return mlp.apply(obs); }

void ObservationEncoder::collect(ParameterList& out, const std::string& prefix) const {
  mlp.collect(out, prefix);
}

AlignmentTokens AlignmentTokens::init(std::size_t history, std::size_t horizon,
                                      std::size_t model_dim, Rng& rng) {
  return {uniform_parameter({horizon, model_dim}, 1.0, rng),
          uniform_parameter({history, model_dim}, 1.0, rng),
          uniform_parameter({1, model_dim}, 1.0, rng)};
}

void AlignmentTokens::collect(ParameterList& out, const std::string& prefix) const {
  out.add(prefix + "a_hat", a_hat);
  out.add(prefix + "s_hat", s_hat);
  out.add(prefix + "t_hat", t_hat);
}

DenoisingNetwork::DenoisingNetwork(const PolicyNetworkConfig& cfg, Rng& rng) : config_(cfg) {
  cfg.validate();
  obs_encoder = ObservationEncoder::init(cfg.obs_input_dim(), cfg.model_dim, rng);
  action_encoder = Linear::init(cfg.act_dim, cfg.model_dim, rng);
  time = TimeEmbedding::init(cfg.diffusion_steps, cfg.model_dim, rng);
  head = Linear::init(cfg.model_dim, cfg.act_dim, rng);
}

Tensor DenoisingNetwork::batched_features(const Tensor& s_hist, const Tensor& a_noisy,
                                          const std::vector<std::size_t>& t,
                                          bool& batched) const {
  const std::size_t k = config_.history, j = config_.horizon;
  batched = s_hist.rank() == 3;
  const bool shapes_ok =
      batched ? (a_noisy.rank() == 3 && s_hist.dim(0) == a_noisy.dim(0) && s_hist.dim(1) == k &&
                 s_hist.dim(2) == config_.obs_input_dim() && a_noisy.dim(1) == j &&
                 a_noisy.dim(2) == config_.act_dim)
              : (s_hist.rank() == 2 && a_noisy.rank() == 2 && s_hist.dim(0) == k &&
                 s_hist.dim(1) == config_.obs_input_dim() && a_noisy.dim(0) == j &&
                 a_noisy.dim(1) == config_.act_dim);
  if (!shapes_ok) {
    throw DimensionError("network: expected s_hist [B?, " + std::to_string(k) + ", " +
                         std::to_string(config_.obs_input_dim()) + "] and a_noisy [B?, " +
                         std::to_string(j) + ", " + std::to_string(config_.act_dim) + "], got " +
                         to_string(s_hist.shape()) + " and " + to_string(a_noisy.shape()));
  }
  const Tensor s3 = batched ? s_hist : reshape(s_hist, {1, k, s_hist.dim(1)});
  const Tensor a3 = batched ? a_noisy : reshape(a_noisy, {1, j, a_noisy.dim(1)});
  if (t.size() != s3.dim(0)) {
    throw DimensionError("network: " + std::to_string(t.size()) + " diffusion steps for batch " +
                         std::to_string(s3.dim(0)));
  }
  return action_features(s3, a3, t);
}

Tensor DenoisingNetwork::forward(const Tensor& s_hist, const Tensor& a_noisy,
                                 const std::vector<std::size_t>& t) const {
  bool batched = false;
  const Tensor y = head.apply(batched_features(s_hist, a_noisy, t, batched));
  return batched ? y : reshape(y, {config_.horizon, config_.act_dim});
}

Tensor DenoisingNetwork::forward(const Tensor& s_hist, const Tensor& a_noisy,
                                 std::size_t t) const {
  const std::size_t b = s_hist.rank() == 3 ? s_hist.dim(0) : 1;
  return forward(s_hist, a_noisy, std::vector<std::size_t>(b, t));
}

Tensor DenoisingNetwork::latent(const Tensor& s_hist, const Tensor& a_noisy,
                                const std::vector<std::size_t>& t) const {
  bool batched = false;
  const Tensor f = batched_features(s_hist, a_noisy, t, batched);
  return reshape(slice(f, 1, 0, 1), {f.dim(0), f.dim(2)});
}

ParameterList DenoisingNetwork::parameters() const {
  ParameterList out;
  obs_encoder.collect(out, "obs_encoder.");
  action_encoder.collect(out, "action_encoder.");
  time.collect(out, "time_embedding.");
  collect_backbone(out);
  head.collect(out, "head.");
  return out;
}

Tensor DenoisingNetwork::time_tokens(const std::vector<std::size_t>& t) const {
  return time.apply(t);
}

Tensor DenoisingNetwork::observation_tokens(const Tensor& s_hist) const {
  return apply_positional_encoding(obs_encoder.apply(s_hist),
                                   config_.layout().observation_positions());
}

Tensor DenoisingNetwork::action_tokens(const Tensor& a_noisy) const {
  return apply_positional_encoding(action_encoder.apply(a_noisy),
                                   config_.layout().action_positions());
}

DMaNetwork::DMaNetwork(const PolicyNetworkConfig& cfg, Rng& rng) : DenoisingNetwork(cfg, rng) {
  backbone = MambaStack::init(cfg.mamba(), cfg.depth, rng, cfg.scan_mode);
}

Tensor DMaNetwork::action_features(const Tensor& s_hist, const Tensor& a_noisy,
                                   const std::vector<std::size_t>& t) const {
  const Tensor x = concat({time_tokens(t), observation_tokens(s_hist), action_tokens(a_noisy)}, 1);
  return slice(backbone.forward(x), 1, 1 + config_.history, config_.horizon);
}

void DMaNetwork::collect_backbone(ParameterList& out) const { backbone.collect(out, "backbone."); }

EDMaNetwork::EDMaNetwork(const PolicyNetworkConfig& cfg, Rng& rng) : DenoisingNetwork(cfg, rng) {
  encoder = MambaStack::init(cfg.mamba(), cfg.encoder_depth, rng, cfg.scan_mode);
  decoder = MambaStack::init(cfg.mamba(), cfg.decoder_depth, rng, cfg.scan_mode);
  alignment = AlignmentTokens::init(cfg.history, cfg.horizon, cfg.model_dim, rng);
}

Tensor EDMaNetwork::encoder_stream(const Tensor& s_hist, const std::vector<std::size_t>& t) const {
  const std::size_t b = s_hist.dim(0);
  return concat({time_tokens(t), observation_tokens(s_hist),
                 broadcast_leading(alignment.a_hat, {b})},
                1);
}

Tensor EDMaNetwork::decoder_stream(const Tensor& a_noisy) const {
  const std::size_t b = a_noisy.dim(0);
  return concat({broadcast_leading(alignment.t_hat, {b}), broadcast_leading(alignment.s_hat, {b}),
                 action_tokens(a_noisy)},
                1);
}

Tensor EDMaNetwork::action_features(const Tensor& s_hist, const Tensor& a_noisy,
                                    const std::vector<std::size_t>& t) const {
  const Tensor enc_in = encoder_stream(s_hist, t);
  const Tensor dec_in = decoder_stream(a_noisy);
  if (enc_in.dim(1) != dec_in.dim(1)) {
    throw ContractError("ED-Ma alignment: encoder stream length " + std::to_string(enc_in.dim(1)) +
                        " != decoder stream length " + std::to_string(dec_in.dim(1)));
  }
  const Tensor e_hat = encoder.forward(enc_in);
  const Tensor d_hat = decoder.run_layers(dec_in, 0, 1);
  const Tensor h = decoder.final_norm.apply(decoder.run_layers(add(e_hat, d_hat), 1,
                                                                decoder.depth()));
  return slice(h, 1, 1 + config_.history, config_.horizon);
}

void EDMaNetwork::collect_backbone(ParameterList& out) const {
  encoder.collect(out, "encoder.");
  decoder.collect(out, "decoder.");
  alignment.collect(out, "alignment.");
}

DTrNetwork::DTrNetwork(const PolicyNetworkConfig& cfg, Rng& rng) : DenoisingNetwork(cfg, rng) {
  backbone = TransformerStack::init(cfg.model_dim, cfg.depth, cfg.heads, cfg.ff_dim, true, false,
                                    rng);
}

Tensor DTrNetwork::action_features(const Tensor& s_hist, const Tensor& a_noisy,
                                   const std::vector<std::size_t>& t) const {
  const Tensor x = concat({time_tokens(t), observation_tokens(s_hist), action_tokens(a_noisy)}, 1);
  return slice(backbone.forward(x), 1, 1 + config_.history, config_.horizon);
}

void DTrNetwork::collect_backbone(ParameterList& out) const { backbone.collect(out, "backbone."); }

EDTrNetwork::EDTrNetwork(const PolicyNetworkConfig& cfg, Rng& rng) : DenoisingNetwork(cfg, rng) {
  encoder = TransformerStack::init(cfg.model_dim, cfg.encoder_depth, cfg.heads, cfg.ff_dim, false,
                                   false, rng);
  decoder = TransformerStack::init(cfg.model_dim, cfg.decoder_depth, cfg.heads, cfg.ff_dim, true,
                                   true, rng);
}

Tensor EDTrNetwork::action_features(const Tensor& s_hist, const Tensor& a_noisy,
                                    const std::vector<std::size_t>& t) const {
  const Tensor memory = encoder.forward(concat({time_tokens(t), observation_tokens(s_hist)}, 1));
  return decoder.forward(action_tokens(a_noisy), memory);
}

void EDTrNetwork::collect_backbone(ParameterList& out) const {
  encoder.collect(out, "encoder.");
  decoder.collect(out, "decoder.");
}

std::unique_ptr<DenoisingNetwork> make_network(const PolicyNetworkConfig& cfg, Rng& rng) {
  switch (cfg.variant) {
    case Variant::kDMa: return std::make_unique<DMaNetwork>(cfg, rng);
    case Variant::kEDMa: return std::make_unique<EDMaNetwork>(cfg, rng);
    case Variant::kDTr: return std::make_unique<DTrNetwork>(cfg, rng);
    case Variant::kEDTr: return std::make_unique<EDTrNetwork>(cfg, rng);
  }
  throw ContractError("make_network: unknown variant");
}

Tensor d_ma_forward(const DMaNetwork& net, const Tensor& s_hist, const Tensor& a_noisy,
                    std::size_t t) {
  return net.forward(s_hist, a_noisy, t);
}

Tensor ed_ma_forward(const EDMaNetwork& net, const Tensor& s_hist, const Tensor& a_noisy,
                     std::size_t t) {
  return net.forward(s_hist, a_noisy, t);
}

Tensor attention_baseline_forward(const DenoisingNetwork& net, const Tensor& s_hist,
                                  const Tensor& a_noisy, std::size_t t) {
  if (is_mamba(net.config().variant)) {
    throw ContractError("attention_baseline_forward: " + to_string(net.config().variant) +
                        " is not an attention variant");
  }
  return net.forward(s_hist, a_noisy, t);
}

ParameterCount count_parameters(const ParameterList& params) {
  return {params.count(), params.count_by_module()};
}

ParameterCount count_parameters(const DenoisingNetwork& net) {
  return count_parameters(net.parameters());
}

}  // namespace mail
