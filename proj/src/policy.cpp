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

#include "mail/policy.h"

#include <cmath>

#include "mail/ops.h"

namespace mail {

double NoiseSchedule::beta_at(std::size_t t) const {
  if (t < 1 || t > steps()) {
    throw ContractError("schedule: step " + std::to_string(t) + " outside [1, " +
                        std::to_string(steps()) + "]");
  }
  return beta[t - 1];
}

double NoiseSchedule::alpha_at(std::size_t t) const { return 1.0 - beta_at(t); }

double NoiseSchedule::alpha_bar_at(std::size_t t) const {
  beta_at(t);
  return alpha_bar[t - 1];
}

NoiseSchedule schedule_from_betas(const std::vector<double>& beta) {
  if (beta.empty()) throw ContractError("schedule: needs at least one step");
  NoiseSchedule s;
  double running = 1.0;
  for (double b : beta) {
    if (!(b > 0.0 && b < 1.0)) throw ContractError("schedule: beta must lie in (0, 1)");
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    running *= 1.0 - b;
    s.alpha_bar.push_back(running);
  }
  return s;
}

NoiseSchedule make_noise_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw ContractError("schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ContractError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> beta(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    beta[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return schedule_from_betas(beta);
}

NoiseRule parse_noise_rule(const std::string& name) {
  if (name == "paper") return NoiseRule::kPaper;
  if (name == "standard") return NoiseRule::kStandard;
  throw ContractError("unknown noise_rule '" + name + "' (expected paper or standard)");
}

std::string to_string(NoiseRule rule) { return rule == NoiseRule::kPaper ? "paper" : "standard"; }

void BcConfig::validate() const {
  if (!(variance > 0.0)) throw ContractError("bc: variance must be positive");
}

Denoiser Denoiser::of(const DenoisingNetwork& net) {
  return {net.config().horizon, net.config().act_dim,
          [&net](const Tensor& s, const Tensor& a, const std::vector<std::size_t>& t) {
            return net.forward(s, a, t);
          }};
}

Tensor forward_noising(const Tensor& a0, std::size_t t, const Tensor& z, const NoiseSchedule& sched) {
  if (a0.shape() != z.shape()) throw DimensionError("forward_noising: a0 and z differ in shape");
  const double ab = sched.alpha_bar_at(t);
  return add(scale(a0, std::sqrt(ab)), scale(z, std::sqrt(1.0 - ab)));
}

Tensor ddpm_step(const Tensor& a_t, const Tensor& eps_hat, std::size_t t, const Tensor& z,
                 const NoiseSchedule& sched, NoiseRule rule) {
  if (a_t.shape() != eps_hat.shape()) throw DimensionError("ddpm_step: a_t and eps_hat differ");
  const double alpha = sched.alpha_at(t);
  const double drift = (1.0 - alpha) / std::sqrt(1.0 - sched.alpha_bar_at(t));
  Tensor out = scale(sub(a_t, scale(eps_hat, drift)), 1.0 / std::sqrt(alpha));
  if (t > 1) {
    if (z.shape() != a_t.shape()) throw DimensionError("ddpm_step: z differs from a_t");
    const double c = rule == NoiseRule::kPaper ? std::sqrt(alpha) : std::sqrt(sched.beta_at(t));
    out = add(out, scale(z, c));
  }
  return out;
}

namespace {

void require_batch(const Batch& batch, const Denoiser& net) {
  if (batch.s_hist.rank() != 3 || batch.actions.rank() != 3 ||
      batch.s_hist.dim(0) != batch.actions.dim(0) || batch.actions.dim(1) != net.horizon ||
      batch.actions.dim(2) != net.act_dim) {
    throw DimensionError("batch: s_hist " + to_string(batch.s_hist.shape()) + " / actions " +
                         to_string(batch.actions.shape()) + " do not match the network");
  }
  if (batch.size() == 0) throw ContractError("batch: empty");
}

}  // namespace

Tensor ddpm_training_loss(const Denoiser& net, const Batch& batch, const NoiseSchedule& sched,
                          Rng& rng) {
  require_batch(batch, net);
  const std::size_t b = batch.size();
  const std::size_t chunk = net.horizon * net.act_dim;
  std::vector<std::size_t> t(b);
  std::vector<double> z(b * chunk), noisy(b * chunk);
  const auto a0 = batch.actions.data();
  for (std::size_t r = 0; r < b; ++r) {
    t[r] = 1 + rng.index(sched.steps());
    const double ab = sched.alpha_bar_at(t[r]);
    for (std::size_t i = 0; i < chunk; ++i) {
      const std::size_t k = r * chunk + i;
      z[k] = rng.normal();
      noisy[k] = std::sqrt(ab) * a0[k] + std::sqrt(1.0 - ab) * z[k];
    }
  }
  const Shape shape = batch.actions.shape();
  const Tensor pred = net.predict(batch.s_hist, Tensor(shape, std::move(noisy)), t);
  return batch_squared_error(pred, Tensor(shape, std::move(z)));
}

Tensor ddpm_sample(const Denoiser& net, const Tensor& s_hist, const NoiseSchedule& sched,
                   NoiseRule rule, std::vector<Rng>& rngs) {
  if (s_hist.rank() != 3) throw DimensionError("ddpm_sample: s_hist must be [B, K, obs]");
  const std::size_t b = s_hist.dim(0);
  if (rngs.size() != b) throw DimensionError("ddpm_sample: one rng per batch row required");
  const std::size_t chunk = net.horizon * net.act_dim;
  const Shape shape{b, net.horizon, net.act_dim};
  std::vector<double> a(b * chunk);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t i = 0; i < chunk; ++i) a[r * chunk + i] = rngs[r].normal();
  }
  for (std::size_t t = sched.steps(); t >= 1; --t) {
    const Tensor eps = net.predict(s_hist, Tensor(shape, a), std::vector<std::size_t>(b, t));
    const auto e = eps.data();
    const double alpha = sched.alpha_at(t);
    const double drift = (1.0 - alpha) / std::sqrt(1.0 - sched.alpha_bar_at(t));
    const double c = t == 1 ? 0.0
                     : rule == NoiseRule::kPaper ? std::sqrt(alpha)
                                                 : std::sqrt(sched.beta_at(t));
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t i = 0; i < chunk; ++i) {
        const std::size_t k = r * chunk + i;
        a[k] = (a[k] - drift * e[k]) / std::sqrt(alpha);
        if (t > 1) a[k] += c * rngs[r].normal();
      }
    }
  }
  return Tensor(shape, std::move(a));
}

Tensor ddpm_sample(const Denoiser& net, const Tensor& s_hist, const NoiseSchedule& sched,
                   const SamplerOptions& opts) {
  const bool batched = s_hist.rank() == 3;
  const Tensor s3 = batched ? s_hist : reshape(s_hist, {1, s_hist.dim(0), s_hist.dim(1)});
  std::vector<Rng> rngs;
  for (std::size_t r = 0; r < s3.dim(0); ++r) rngs.push_back(Rng::derive(opts.seed, r));
  const Tensor a = ddpm_sample(net, s3, sched, opts.noise_rule, rngs);
  return batched ? a : reshape(a, {net.horizon, net.act_dim});
}

Tensor bc_loss(const Denoiser& net, const Batch& batch) {
  require_batch(batch, net);
  const Tensor pred = net.predict(batch.s_hist, Tensor::zeros(batch.actions.shape()),
                                  std::vector<std::size_t>(batch.size(), 1));
  return batch_squared_error(pred, batch.actions);
}

Tensor bc_predict(const Denoiser& net, const Tensor& s_hist) {
  const bool batched = s_hist.rank() == 3;
  const Tensor s3 = batched ? s_hist : reshape(s_hist, {1, s_hist.dim(0), s_hist.dim(1)});
  const std::size_t b = s3.dim(0);
  const Tensor a = net.predict(s3, Tensor::zeros({b, net.horizon, net.act_dim}),
                               std::vector<std::size_t>(b, 1));
  return batched ? a : reshape(a, {net.horizon, net.act_dim});
}

}  // namespace mail
