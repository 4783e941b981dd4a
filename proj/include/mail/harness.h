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
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mail/architectures.h"
#include "mail/binary_io.h"
#include "mail/params.h"
#include "mail/policy.h"
#include "mail/toy_il.h"

namespace mail {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Non-finite training loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolicyKind { kBC, kDDP };
PolicyKind parse_policy_kind(const std::string& name);
std::string to_string(PolicyKind kind);

struct TrainConfig {
  std::string task = "multimodal_reach";
  PolicyKind policy = PolicyKind::kDDP;
  Variant variant = Variant::kDMa;
  std::size_t history = 5;
  std::size_t horizon = 4;
  /// Chunk actions executed before the policy is queried again.
  std::size_t action_steps = 1;
  std::size_t model_dim = 64;
  std::size_t state_dim = 8;
  std::size_t conv_width = 4;
  std::size_t depth = 6;
  std::size_t encoder_depth = 4;
  std::size_t decoder_depth = 4;
  std::size_t heads = 4;
  std::size_t ff_dim = 128;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::uint32_t seed = 0;
  std::size_t diffusion_steps = 16;
  double beta_start = 1e-4;
  double beta_end = 0.1;
  NoiseRule noise_rule = NoiseRule::kStandard;
  std::string dataset;
  double occlusion = 0.0;
  ScanMode scan_mode = ScanMode::kParallel;
  std::size_t eval_episodes = 0;
  std::size_t eval_every = 0;
  std::size_t checkpoint_every = 0;
  std::size_t k_needed = 3;

  void validate() const;
  /// Network shape for this task's observation and action widths.
  PolicyNetworkConfig network() const;
  NoiseSchedule schedule() const;
  std::unique_ptr<ToyEnv> env() const;
};

/// Flat `key = value` lines; '#' starts a comment. Unknown keys are errors.
TrainConfig parse_config(const std::string& text);
/// Resolves a relative `dataset` against the config file's directory.
TrainConfig load_config(const std::string& path);
/// Every key in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const TrainConfig& cfg);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

/// One bias-corrected Adam update applied in place to `params`.
void optimizer_step(const std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
                    double lr);

inline constexpr char kActionScaleBuffer[] = "buffer.action_scale";

struct Checkpoint {
  TrainConfig config;
  std::uint32_t epoch = 0;
  std::string rng_state;
  /// Trainable parameters followed by non-trainable buffers.
  std::vector<NamedTensor> tensors;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// A trained network bundled with what it needs to act in an environment.
class TrainedPolicy final : public RolloutPolicy {
 public:
  explicit TrainedPolicy(const Checkpoint& ckpt);

  std::size_t history() const override { return config_.history; }
  std::size_t obs_dim() const override { return net_config_.obs_dim; }
  std::size_t act_dim() const override { return net_config_.act_dim; }
  void begin(std::size_t episodes) override;
  Tensor act(const std::vector<std::size_t>& episodes, const Tensor& windows, std::vector<Rng>& rngs) override;

  /// Full predicted action chunks in environment units, [B, J, act_dim].
  Tensor predict_chunk(const Tensor& windows, std::vector<Rng>& rngs) const;

  const TrainConfig& config() const { return config_; }
  const DenoisingNetwork& network() const { return *net_; }
  const std::vector<double>& action_scale() const { return action_scale_; }

 private:
  TrainConfig config_;
  PolicyNetworkConfig net_config_;
  NoiseSchedule schedule_;
  std::unique_ptr<DenoisingNetwork> net_;
  std::vector<double> action_scale_;
  std::vector<std::vector<double>> pending_;  // queued chunk actions per episode
};

/// Training pairs: an observation window ending at each step and the action
/// chunk starting there. Windows are zero padded before the first step and
/// chunks are zero padded past the last.
struct WindowedSamples {
  std::size_t history = 1, horizon = 1, obs_dim = 0, act_dim = 0;
  std::vector<double> windows;  // [count, K, obs_dim]
  std::vector<double> chunks;   // [count, J, act_dim]
  std::size_t count() const { return obs_dim == 0 ? 0 : windows.size() / (history * obs_dim); }
};

WindowedSamples make_windowed_samples(const DemoDataset& ds, std::size_t history, std::size_t horizon);
/// Per action coordinate max |a| over the dataset; 1 where that is zero.
std::vector<double> action_scale(const DemoDataset& ds);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> eval_success;
  double seconds = 0.0;
  std::size_t param_count = 0;
};

/// Header line carrying the config, then one JSON object per epoch.
std::string metrics_header_line(const TrainConfig& cfg);
std::string metrics_line(const EpochMetrics& m);

struct TrainOptions {
  /// When set, metrics.jsonl and final.ckpt (plus periodic epoch_N.ckpt) go here.
  std::string out_dir;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

TrainResult train(const TrainConfig& cfg, const DemoDataset& ds, const TrainOptions& opts = {});
/// Loads cfg.dataset.
TrainResult train(const TrainConfig& cfg, const TrainOptions& opts = {});

/// Parameter count of the network a config would train.
ParameterCount count_config_parameters(const TrainConfig& cfg);
/// |a - b| / max(a, b).
double parity_gap(std::size_t a, std::size_t b);

RolloutReport evaluate_checkpoint(const Checkpoint& ckpt, std::size_t episodes, std::uint64_t seed,
                                  double occlusion_rate = 0.0);

struct AblationRow {
  double setting = 0.0;
  double success_rate = 0.0;
};

std::vector<AblationRow> run_occlusion_ablation(const Checkpoint& ckpt, const std::vector<double>& rates,
                                                std::size_t episodes, std::uint64_t seed);
/// Trains one model per fraction on subsample_dataset(ds, f, cfg.seed); rows
/// come back sorted by fraction.
std::vector<AblationRow> run_datasize_ablation(const TrainConfig& cfg, const DemoDataset& ds,
                                               const std::vector<double>& fractions, std::size_t episodes,
                                               std::uint64_t seed);

/// Writes `<prefix>.csv` (header plus one row per setting) and `<prefix>.dat`
/// (whitespace separated columns for plotting).
void write_ablation(const std::vector<AblationRow>& rows, const std::string& column, const std::string& prefix);

struct LatentExport {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> latents;     // [rows, dim]
  std::vector<double> projection;  // [rows, 2] when requested
  std::vector<double> explained;   // variance of the two components
};

/// Backbone features at the first action slot for every step of every
/// trajectory, with zero action input at diffusion step 1.
LatentExport compute_latents(const TrainedPolicy& policy, const DemoDataset& ds, bool pca);
/// Rows are trajectory,step,z0..z{D-1}[,pc1,pc2].
void export_latents(const Checkpoint& ckpt, const DemoDataset& ds, const std::string& path, bool pca);

/// Top two principal directions of row-major data [rows, dim]. Each direction
/// is signed so its largest-magnitude entry is positive.
void pca_project(const std::vector<double>& data, std::size_t rows, std::size_t dim, std::vector<double>& out,
                 std::vector<double>& explained);

}  // namespace mail
