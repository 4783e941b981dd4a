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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mail/harness.h"
#include "mail/policy.h"

namespace mail {
namespace {

Tensor deep_copy(const Tensor& t) {
  const auto d = t.data();
  return Tensor(t.shape(), std::vector<double>(d.begin(), d.end()));
}

void check_dataset(const TrainConfig& cfg, const DemoDataset& ds) {
  const auto env = cfg.env();
  if (ds.task != cfg.task) throw ContractError("dataset task '" + ds.task + "' does not match config task '" + cfg.task + "'");
  if (ds.obs_dim != env->obs_dim() || ds.act_dim != env->act_dim() || ds.cond_dim != 0) {
    throw DimensionError("dataset dims " + std::to_string(ds.obs_dim) + "/" + std::to_string(ds.act_dim) +
                         " do not match task '" + cfg.task + "'");
  }
  ds.validate();
}

Checkpoint snapshot(const TrainConfig& cfg, const ParameterList& params, const std::vector<double>& scale,
                    std::uint32_t epoch, const Rng& rng) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.epoch = epoch;
  ckpt.rng_state = rng.state();
  for (const NamedTensor& nt : params.items()) ckpt.tensors.push_back({nt.name, deep_copy(nt.tensor)});
  ckpt.tensors.push_back({kActionScaleBuffer, Tensor({scale.size()}, scale)});
  return ckpt;
}

std::string metrics_text(const TrainConfig& cfg, const std::vector<EpochMetrics>& rows) {
  std::string out = metrics_header_line(cfg) + "\n";
  for (const auto& m : rows) out += metrics_line(m) + "\n";
  return out;
}

}  // namespace

WindowedSamples make_windowed_samples(const DemoDataset& ds, std::size_t history, std::size_t horizon) {
  WindowedSamples out;
  out.history = history;
  out.horizon = horizon;
  out.obs_dim = ds.obs_dim;
  out.act_dim = ds.act_dim;
  const std::size_t d = ds.obs_dim, a = ds.act_dim;
  for (const Trajectory& t : ds.trajectories) {
    const auto obs = t.observations.data();
    const auto act = t.actions.data();
    const std::size_t steps = t.steps();
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t k = 0; k < history; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s + k) - static_cast<std::ptrdiff_t>(history - 1);
        for (std::size_t c = 0; c < d; ++c) {
          out.windows.push_back(src < 0 ? 0.0 : obs[static_cast<std::size_t>(src) * d + c]);
        }
      }
      for (std::size_t j = 0; j < horizon; ++j) {
        for (std::size_t c = 0; c < a; ++c) out.chunks.push_back(s + j < steps ? act[(s + j) * a + c] : 0.0);
      }
    }
  }
  return out;
}

std::vector<double> action_scale(const DemoDataset& ds) {
  std::vector<double> scale(ds.act_dim, 0.0);
  for (const Trajectory& t : ds.trajectories) {
    const auto act = t.actions.data();
    for (std::size_t i = 0; i < act.size(); ++i) scale[i % ds.act_dim] = std::max(scale[i % ds.act_dim], std::abs(act[i]));
  }
  for (double& s : scale) {
    if (s == 0.0) s = 1.0;
  }
  return scale;
}

std::string metrics_header_line(const TrainConfig& cfg) {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::istringstream in(serialize_config(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    config[line.substr(0, eq)] = line.substr(eq + 3);
  }
  nlohmann::ordered_json j;
  j["type"] = "config";
  j["config"] = config;
  return j.dump();
}

std::string metrics_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["type"] = "epoch";
  j["epoch"] = m.epoch;
  j["loss"] = m.loss;
  j["eval_success"] = m.eval_success ? nlohmann::ordered_json(*m.eval_success) : nlohmann::ordered_json();
  j["seconds"] = m.seconds;
  j["param_count"] = m.param_count;
  return j.dump();
}

TrainedPolicy::TrainedPolicy(const Checkpoint& ckpt)
    : config_(ckpt.config), net_config_(ckpt.config.network()), schedule_(ckpt.config.schedule()) {
  Rng init(0);
  net_ = make_network(net_config_, init);
  std::map<std::string, const Tensor*> stored;
  for (const NamedTensor& nt : ckpt.tensors) stored[nt.name] = &nt.tensor;
  const ParameterList params = net_->parameters();
  for (const NamedTensor& nt : params.items()) {
    const auto it = stored.find(nt.name);
    if (it == stored.end()) throw FormatError("checkpoint: missing parameter '" + nt.name + "'");
    if (it->second->shape() != nt.tensor.shape()) {
      throw FormatError("checkpoint: parameter '" + nt.name + "' has shape " + to_string(it->second->shape()) +
                        ", network expects " + to_string(nt.tensor.shape()));
    }
    Tensor dst = nt.tensor;
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    stored.erase(it);
  }
  const auto scale = stored.find(kActionScaleBuffer);
  if (scale == stored.end() || scale->second->numel() != net_config_.act_dim) {
    throw FormatError(std::string("checkpoint: missing or malformed ") + kActionScaleBuffer);
  }
  const auto sd = scale->second->data();
  action_scale_.assign(sd.begin(), sd.end());
  stored.erase(scale);
  if (!stored.empty()) throw FormatError("checkpoint: unexpected tensor '" + stored.begin()->first + "'");
}

Tensor TrainedPolicy::predict_chunk(const Tensor& windows, std::vector<Rng>& rngs) const {
  const Denoiser den = Denoiser::of(*net_);
  Tensor chunk = config_.policy == PolicyKind::kBC ? bc_predict(den, windows)
                                                   : ddpm_sample(den, windows, schedule_, config_.noise_rule, rngs);
  auto c = chunk.mutable_data();
  const std::size_t a = action_scale_.size();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= action_scale_[i % a];
  return chunk;
}

void TrainedPolicy::begin(std::size_t episodes) { pending_.assign(episodes, {}); }

Tensor TrainedPolicy::act(const std::vector<std::size_t>& episodes, const Tensor& windows, std::vector<Rng>& rngs) {
  const std::size_t a = net_config_.act_dim;
  for (std::size_t e : episodes) {
    if (e >= pending_.size()) pending_.resize(e + 1);
  }
  // Only episodes whose queue ran dry are replanned.
  std::vector<std::size_t> stale;
  for (std::size_t r = 0; r < episodes.size(); ++r) {
    if (pending_[episodes[r]].empty()) stale.push_back(r);
  }
  if (!stale.empty()) {
    const std::size_t k = windows.dim(1), d = windows.dim(2);
    const auto w = windows.data();
    std::vector<double> sub;
    std::vector<Rng> sub_rngs;
    sub.reserve(stale.size() * k * d);
    for (std::size_t r : stale) {
      const auto row = w.subspan(r * k * d, k * d);
      sub.insert(sub.end(), row.begin(), row.end());
      sub_rngs.push_back(rngs[r]);
    }
    const Tensor chunk = predict_chunk(Tensor({stale.size(), k, d}, std::move(sub)), sub_rngs);
    const auto c = chunk.data();
    const std::size_t j = chunk.dim(1);
    for (std::size_t i = 0; i < stale.size(); ++i) {
      rngs[stale[i]] = sub_rngs[i];
      auto& queue = pending_[episodes[stale[i]]];
      const auto first = c.subspan(i * j * a, config_.action_steps * a);
      queue.assign(first.begin(), first.end());
    }
  }
  std::vector<double> out;
  out.reserve(episodes.size() * a);
  for (std::size_t e : episodes) {
    auto& queue = pending_[e];
    out.insert(out.end(), queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(a));
    queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(a));
  }
  return Tensor({episodes.size(), a}, std::move(out));
}

TrainResult train(const TrainConfig& cfg, const DemoDataset& ds, const TrainOptions& opts) {
  cfg.validate();
  check_dataset(cfg, ds);
  const PolicyNetworkConfig net_cfg = cfg.network();
  const NoiseSchedule sched = cfg.schedule();
  Rng init = Rng::derive(cfg.seed, 0);
  const auto net = make_network(net_cfg, init);
  Rng rng = Rng::derive(cfg.seed, 1);

  WindowedSamples samples = make_windowed_samples(ds, cfg.history, cfg.horizon);
  const std::size_t count = samples.count();
  if (count == 0) throw ContractError("dataset has no steps to train on");
  const std::vector<double> scale = action_scale(ds);
  for (std::size_t i = 0; i < samples.chunks.size(); ++i) samples.chunks[i] /= scale[i % samples.act_dim];

  const ParameterList params = net->parameters();
  const std::vector<Tensor> trainable = params.trainable();
  const std::size_t param_count = params.count();
  const Denoiser den = Denoiser::of(*net);
  AdamState adam;

  const std::size_t win = cfg.history * samples.obs_dim;
  const std::size_t chunk = cfg.horizon * samples.act_dim;
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < count; b0 += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, count - b0);
      std::vector<double> s(bsz * win), a(bsz * chunk);
      for (std::size_t r = 0; r < bsz; ++r) {
        const std::size_t i = order[b0 + r];
        std::copy_n(samples.windows.begin() + static_cast<std::ptrdiff_t>(i * win), win, s.begin() + static_cast<std::ptrdiff_t>(r * win));
        std::copy_n(samples.chunks.begin() + static_cast<std::ptrdiff_t>(i * chunk), chunk, a.begin() + static_cast<std::ptrdiff_t>(r * chunk));
      }
      if (!std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); }) ||
          !std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); })) {
        throw NumericError("non-finite training data at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
      }
      if (cfg.occlusion > 0.0) apply_occlusion_inplace(s, cfg.occlusion, rng);
      const Batch batch{Tensor({bsz, cfg.history, samples.obs_dim}, std::move(s)),
                        Tensor({bsz, cfg.horizon, samples.act_dim}, std::move(a))};
      std::vector<Tensor> grads;
      {
        GradientTape tape;
        const Tensor loss = cfg.policy == PolicyKind::kBC ? bc_loss(den, batch) : ddpm_training_loss(den, batch, sched, rng);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
        }
        loss_sum += value;
        const Gradients g = tape.backward(loss);
        grads.reserve(trainable.size());
        for (const Tensor& p : trainable) grads.push_back(g.of(p));
      }
      optimizer_step(trainable, grads, adam, cfg.learning_rate);
      ++batches;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(batches);
    m.param_count = param_count;
    const bool eval_now = cfg.eval_every > 0 && epoch % cfg.eval_every == 0;
    const bool save_now = cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
    if (eval_now || save_now) {
      const Checkpoint ckpt = snapshot(cfg, params, scale, static_cast<std::uint32_t>(epoch), rng);
      if (eval_now) m.eval_success = evaluate_checkpoint(ckpt, cfg.eval_episodes, cfg.seed).success_rate;
      if (save_now && !opts.out_dir.empty()) {
        save_checkpoint(ckpt, (std::filesystem::path(opts.out_dir) / ("epoch_" + std::to_string(epoch) + ".ckpt")).string());
      }
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.metrics.push_back(m);
    if (!opts.out_dir.empty()) {
      write_text_atomic((std::filesystem::path(opts.out_dir) / "metrics.jsonl").string(), metrics_text(cfg, result.metrics));
    }
    if (opts.on_epoch) opts.on_epoch(m);
  }
  result.checkpoint = snapshot(cfg, params, scale, static_cast<std::uint32_t>(cfg.epochs), rng);
  if (!opts.out_dir.empty()) {
    save_checkpoint(result.checkpoint, (std::filesystem::path(opts.out_dir) / "final.ckpt").string());
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const TrainOptions& opts) {
  if (cfg.dataset.empty()) throw ConfigError("key 'dataset': required to train from a config file");
  return train(cfg, load_dataset(cfg.dataset), opts);
}

ParameterCount count_config_parameters(const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return count_parameters(*make_network(cfg.network(), rng));
}

double parity_gap(std::size_t a, std::size_t b) {
  const double hi = static_cast<double>(std::max(a, b));
  return hi == 0.0 ? 0.0 : std::abs(static_cast<double>(a) - static_cast<double>(b)) / hi;
}

RolloutReport evaluate_checkpoint(const Checkpoint& ckpt, std::size_t episodes, std::uint64_t seed,
                                  double occlusion_rate) {
  TrainedPolicy policy(ckpt);
  const auto env = ckpt.config.env();
  return rollout_evaluate(policy, *env, episodes, seed, occlusion_rate);
}

}  // namespace mail
