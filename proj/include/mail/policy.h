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
#include <string>
#include <vector>

#include "mail/architectures.h"
#include "mail/rng.h"
#include "mail/tensor.h"

namespace mail {

struct NoiseSchedule {
  std::vector<double> beta;       // beta[t - 1] for t = 1..T
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // running product of alpha

  std::size_t steps() const { return beta.size(); }
  /// Accessors indexed by the diffusion step t in [1, T].
  double beta_at(std::size_t t) const;
  double alpha_at(std::size_t t) const;
  double alpha_bar_at(std::size_t t) const;
};

/// Linearly spaced betas from beta_start to beta_end.
NoiseSchedule make_noise_schedule(std::size_t steps, double beta_start, double beta_end);
/// Schedule from explicit per-step betas, each in (0, 1).
NoiseSchedule schedule_from_betas(const std::vector<double>& beta);

enum class NoiseRule { kPaper, kStandard };
NoiseRule parse_noise_rule(const std::string& name);
std::string to_string(NoiseRule rule);

struct SamplerOptions {
  NoiseRule noise_rule = NoiseRule::kStandard;
  std::uint64_t seed = 0;
};

/// Fixed output variance of the Gaussian BC policy. The MSE objective does not
/// use it.
struct BcConfig {
  double variance = 1.0;
  void validate() const;
};

/// Noise predictor with its action-chunk shape. `predict` maps batched
/// s_hist [B, K, obs_in], a [B, J, act] and one step per row to [B, J, act].
struct Denoiser {
  std::size_t horizon = 1;
  std::size_t act_dim = 1;
  std::function<Tensor(const Tensor&, const Tensor&, const std::vector<std::size_t>&)> predict;

  static Denoiser of(const DenoisingNetwork& net);
};

/// Demonstration minibatch: s_hist [B, K, obs_in], actions [B, J, act].
struct Batch {
  Tensor s_hist;
  Tensor actions;

  std::size_t size() const { return s_hist.dim(0); }
};

/// sqrt(abar_t) a0 + sqrt(1 - abar_t) z, elementwise over any shape.
Tensor forward_noising(const Tensor& a0, std::size_t t, const Tensor& z, const NoiseSchedule& sched);

/// One reverse update from a^t given eps_hat, with sampler noise `z` scaled by
/// the rule's coefficient (ignored at t = 1).
Tensor ddpm_step(const Tensor& a_t, const Tensor& eps_hat, std::size_t t, const Tensor& z,
                 const NoiseSchedule& sched, NoiseRule rule);

/// Mean over the batch of ||eps_theta(a^t, t, s) - z||^2 with t uniform in
/// 1..T and z standard normal per item.
Tensor ddpm_training_loss(const Denoiser& net, const Batch& batch, const NoiseSchedule& sched,
                          Rng& rng);

/// Runs the reverse chain from a^T ~ N(0, I). Row b of a batched s_hist draws
/// all of its noise from rngs[b]; rngs.size() must equal the batch size.
Tensor ddpm_sample(const Denoiser& net, const Tensor& s_hist, const NoiseSchedule& sched,
                   NoiseRule rule, std::vector<Rng>& rngs);
/// Unbatched [K, obs_in] -> [J, act] (or batched) with streams derived from
/// opts.seed.
Tensor ddpm_sample(const Denoiser& net, const Tensor& s_hist, const NoiseSchedule& sched,
                   const SamplerOptions& opts);

/// BC uses the denoiser as a mean network: zero action input and t = 1.
Tensor bc_loss(const Denoiser& net, const Batch& batch);
Tensor bc_predict(const Denoiser& net, const Tensor& s_hist);

}  // namespace mail
