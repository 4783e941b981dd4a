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

#include "mail/toy_il.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mail/binary_io.h"

namespace mail {
namespace {

constexpr char kDatasetMagic[] = "MAILDS1";

std::pair<double, double> clip_step(double dx, double dy) {
  const double norm = std::hypot(dx, dy);
  if (norm <= kMaxStep) return {dx, dy};
  return {dx * kMaxStep / norm, dy * kMaxStep / norm};
}

bool near(double x, double y, double gx, double gy) { return std::hypot(x - gx, y - gy) < kGoalRadius; }

void check_action(std::span<const double> action, std::size_t act_dim) {
  if (action.size() != act_dim) {
    throw DimensionError("action has " + std::to_string(action.size()) + " entries, env expects " +
                         std::to_string(act_dim));
  }
}

class ReachExpert final : public ScriptedExpert {
 public:
  void reset(Rng& rng) override { goal_x_ = rng.uniform() < 0.5 ? -1.0 : 1.0; }
  std::vector<double> act(std::span<const double> obs) override {
    const auto [dx, dy] = clip_step(goal_x_ - obs[0], 1.0 - obs[1]);
    return {dx, dy};
  }

 private:
  double goal_x_ = 1.0;
};

class CueExpert final : public ScriptedExpert {
 public:
  void reset(Rng&) override {
    cue_ = 0.0;
    seen_ = 0;
  }
  std::vector<double> act(std::span<const double> obs) override {
    const bool visible = obs[2] != 0.0;
    if (seen_ == 0) cue_ = obs[2];
    ++seen_;
    if (visible) return {0.0, 0.0};
    const auto [dx, dy] = clip_step(cue_ - obs[0], 1.0 - obs[1]);
    return {dx, dy};
  }

 private:
  double cue_ = 0.0;
  std::size_t seen_ = 0;
};

class DeltaExpert final : public ScriptedExpert {
 public:
  void reset(Rng& rng) override { sign_ = rng.uniform() < 0.5 ? -1.0 : 1.0; }
  std::vector<double> act(std::span<const double>) override { return {sign_}; }

 private:
  double sign_ = 1.0;
};

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows, std::size_t width) {
  std::vector<double> flat;
  flat.reserve(rows.size() * width);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor({rows.size(), width}, std::move(flat));
}

}  // namespace

std::size_t DemoDataset::total_steps() const {
  std::size_t total = 0;
  for (const auto& t : trajectories) total += t.steps();
  return total;
}

void DemoDataset::validate() const {
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& t = trajectories[i];
    const std::string where = "trajectory " + std::to_string(i);
    if (t.observations.rank() != 2 || t.observations.dim(1) != obs_dim) {
      throw DimensionError(where + ": observations must be [steps, " + std::to_string(obs_dim) + "]");
    }
    if (t.actions.rank() != 2 || t.actions.dim(1) != act_dim || t.actions.dim(0) != t.steps()) {
      throw DimensionError(where + ": actions must be [" + std::to_string(t.steps()) + ", " +
                           std::to_string(act_dim) + "]");
    }
    const std::size_t cond = t.conditioning.numel();
    if (cond != cond_dim) throw DimensionError(where + ": conditioning size mismatch");
  }
}

void MultimodalReachEnv::reset(Rng& rng) {
  x_ = rng.uniform(-0.01, 0.01);
  y_ = rng.uniform(-0.01, 0.01);
  steps_ = 0;
}

std::vector<double> MultimodalReachEnv::observe() const { return {x_, y_, -1.0, 1.0, 1.0, 1.0}; }

void MultimodalReachEnv::step(std::span<const double> action) {
  check_action(action, act_dim());
  const auto [dx, dy] = clip_step(action[0], action[1]);
  x_ += dx;
  y_ += dy;
  ++steps_;
}

bool MultimodalReachEnv::success() const { return near(x_, y_, -1.0, 1.0) || near(x_, y_, 1.0, 1.0); }

bool MultimodalReachEnv::failed() const { return std::hypot(x_, y_ - kObstacleY) < kObstacleRadius; }

DelayedCueEnv::DelayedCueEnv(std::size_t k_needed) : k_needed_(k_needed) {
  if (k_needed < 2) throw ContractError("delayed_cue needs k_needed >= 2, got " + std::to_string(k_needed));
}

void DelayedCueEnv::reset(Rng& rng) {
  cue_ = rng.uniform() < 0.5 ? -1.0 : 1.0;
  x_ = rng.uniform(-0.01, 0.01);
  y_ = rng.uniform(-0.01, 0.01);
  success_ = failed_ = false;
  steps_ = 0;
}

std::vector<double> DelayedCueEnv::observe() const { return {x_, y_, steps_ < k_needed_ ? cue_ : 0.0}; }

void DelayedCueEnv::step(std::span<const double> action) {
  check_action(action, act_dim());
  if (steps_ >= k_needed_) {
    const auto [dx, dy] = clip_step(action[0], action[1]);
    x_ += dx;
    y_ += dy;
  }
  ++steps_;
  success_ = near(x_, y_, cue_, 1.0);
  failed_ = near(x_, y_, -cue_, 1.0);
}

void TwoDeltaEnv::reset(Rng&) {
  last_ = 0.0;
  steps_ = 0;
}

void TwoDeltaEnv::step(std::span<const double> action) {
  check_action(action, act_dim());
  last_ = action[0];
  ++steps_;
}

bool TwoDeltaEnv::success() const { return steps_ > 0 && std::abs(std::abs(last_) - 1.0) < 0.25; }

std::unique_ptr<ToyEnv> make_env(const std::string& task, std::size_t k_needed) {
  if (task == "multimodal_reach") return std::make_unique<MultimodalReachEnv>();
  if (task == "delayed_cue") return std::make_unique<DelayedCueEnv>(k_needed);
  if (task == "two_delta") return std::make_unique<TwoDeltaEnv>();
  throw ContractError("unknown task '" + task + "'");
}

std::unique_ptr<ScriptedExpert> make_expert(const std::string& task) {
  if (task == "multimodal_reach") return std::make_unique<ReachExpert>();
  if (task == "delayed_cue") return std::make_unique<CueExpert>();
  if (task == "two_delta") return std::make_unique<DeltaExpert>();
  throw ContractError("unknown task '" + task + "'");
}

namespace {

DemoDataset generate_with(const ToyEnv& proto, std::size_t n, std::uint32_t seed) {
  DemoDataset ds;
  ds.task = proto.task();
  ds.seed = seed;
  ds.obs_dim = proto.obs_dim();
  ds.act_dim = proto.act_dim();
  ds.trajectories.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto env = proto.clone();
    auto expert = make_expert(ds.task);
    Rng env_rng = Rng::derive(seed, 2 * i);
    Rng expert_rng = Rng::derive(seed, 2 * i + 1);
    env->reset(env_rng);
    expert->reset(expert_rng);
    std::vector<std::vector<double>> obs, act;
    while (!env->done()) {
      obs.push_back(env->observe());
      act.push_back(expert->act(obs.back()));
      env->step(act.back());
    }
    Trajectory t;
    t.observations = rows_to_tensor(obs, ds.obs_dim);
    t.actions = rows_to_tensor(act, ds.act_dim);
    t.success = env->success();
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

}  // namespace

DemoDataset gen_multimodal_reach(std::size_t n, std::uint32_t seed) {
  if (n < 2) throw ContractError("gen_multimodal_reach needs n >= 2");
  return generate_with(MultimodalReachEnv(), n, seed);
}

DemoDataset gen_delayed_cue(std::size_t n, std::size_t k_needed, std::uint32_t seed) {
  return generate_with(DelayedCueEnv(k_needed), n, seed);
}

DemoDataset gen_two_delta(std::size_t n, std::uint32_t seed) {
  if (n < 1) throw ContractError("gen_two_delta needs n >= 1");
  return generate_with(TwoDeltaEnv(), n, seed);
}

DemoDataset generate_dataset(const std::string& task, std::size_t n, std::uint32_t seed, std::size_t k_needed) {
  if (task == "multimodal_reach") return gen_multimodal_reach(n, seed);
  if (task == "delayed_cue") return gen_delayed_cue(n, k_needed, seed);
  if (task == "two_delta") return gen_two_delta(n, seed);
  throw ContractError("unknown task '" + task + "'");
}

double replay_trajectory(const ToyEnv& proto, const Trajectory& traj, std::uint32_t dataset_seed,
                         std::size_t index, bool& success) {
  auto env = proto.clone();
  Rng rng = Rng::derive(dataset_seed, 2 * index);
  env->reset(rng);
  const std::size_t d = proto.obs_dim(), a = proto.act_dim();
  const auto obs = traj.observations.data();
  const auto act = traj.actions.data();
  double worst = 0.0;
  for (std::size_t s = 0; s < traj.steps(); ++s) {
    const std::vector<double> o = env->observe();
    for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(o[c] - obs[s * d + c]));
    env->step(act.subspan(s * a, a));
  }
  success = env->success();
  return worst;
}

std::vector<std::uint8_t> serialize_dataset(const DemoDataset& ds) {
  ds.validate();
  ByteWriter w;
  w.raw(kDatasetMagic);
  w.str(ds.task);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.obs_dim));
  w.u32(static_cast<std::uint32_t>(ds.act_dim));
  w.u32(static_cast<std::uint32_t>(ds.cond_dim));
  w.u32(ds.seed);
  for (const Trajectory& t : ds.trajectories) {
    w.u32(static_cast<std::uint32_t>(t.steps()));
    w.u8(t.success ? 1 : 0);
    for (double v : t.observations.data()) w.f64(v);
    for (double v : t.actions.data()) w.f64(v);
    if (t.conditioning.defined()) {
      for (double v : t.conditioning.data()) w.f64(v);
    }
  }
  return std::move(w.bytes());
}

DemoDataset deserialize_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size(), "dataset");
  if (r.raw(sizeof kDatasetMagic - 1) != kDatasetMagic) throw FormatError("dataset: bad magic, expected MAILDS1");
  DemoDataset ds;
  ds.task = r.str();
  const std::uint32_t n = r.u32();
  ds.obs_dim = r.u32();
  ds.act_dim = r.u32();
  ds.cond_dim = r.u32();
  ds.seed = r.u32();
  ds.trajectories.reserve(std::min<std::size_t>(n, r.remaining() / 5 + 1));
  const auto read_block = [&r](std::size_t count) {
    std::vector<double> v(count);
    for (double& x : v) x = r.f64();
    return v;
  };
  for (std::uint32_t i = 0; i < n; ++i) {
    Trajectory t;
    const std::size_t steps = r.u32();
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw FormatError("dataset: trajectory " + std::to_string(i) + " has invalid success flag");
    t.success = flag == 1;
    if (steps * (ds.obs_dim + ds.act_dim) * 8 > r.remaining()) {
      throw FormatError("dataset: truncated at byte " + std::to_string(r.offset()));
    }
    t.observations = Tensor({steps, ds.obs_dim}, read_block(steps * ds.obs_dim));
    t.actions = Tensor({steps, ds.act_dim}, read_block(steps * ds.act_dim));
    if (ds.cond_dim > 0) t.conditioning = Tensor({ds.cond_dim}, read_block(ds.cond_dim));
    ds.trajectories.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw FormatError("dataset: " + std::to_string(r.remaining()) + " trailing bytes after trajectory table");
  }
  return ds;
}

void save_dataset(const DemoDataset& ds, const std::string& path) { write_file_atomic(path, serialize_dataset(ds)); }

DemoDataset load_dataset(const std::string& path) { return deserialize_dataset(read_file(path)); }

void OcclusionConfig::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ContractError("occlusion rate must lie in [0, 1], got " + std::to_string(rate));
  }
}

void apply_occlusion_inplace(std::span<double> obs, double rate, Rng& rng) {
  OcclusionConfig{rate, 0}.validate();
  if (rate == 0.0) return;
  for (double& v : obs) {
    if (rng.uniform() < rate) v = 0.0;
  }
}

Tensor apply_occlusion(const Tensor& obs, const OcclusionConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto src = obs.data();
  std::vector<double> out(src.begin(), src.end());
  apply_occlusion_inplace(out, cfg.rate, rng);
  return Tensor(obs.shape(), std::move(out));
}

DemoDataset subsample_dataset(const DemoDataset& ds, double fraction, std::uint32_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ContractError("subsample fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t n = ds.size();
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (keep == 0) throw ContractError("subsample of " + std::to_string(n) + " trajectories is empty");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  DemoDataset out = ds;
  out.trajectories.clear();
  for (std::size_t i : idx) out.trajectories.push_back(ds.trajectories[i]);
  return out;
}

ExpertPolicy::ExpertPolicy(const std::string& task, std::size_t obs_dim, std::size_t act_dim)
    : task_(task), obs_dim_(obs_dim), act_dim_(act_dim) {
  make_expert(task);
}

void ExpertPolicy::begin(std::size_t episodes) {
  experts_.clear();
  for (std::size_t e = 0; e < episodes; ++e) experts_.push_back(make_expert(task_));
  started_.assign(episodes, false);
}

Tensor ExpertPolicy::act(const std::vector<std::size_t>& episodes, const Tensor& windows, std::vector<Rng>& rngs) {
  const std::size_t k = windows.dim(1);
  const auto w = windows.data();
  std::vector<double> out;
  out.reserve(episodes.size() * act_dim_);
  for (std::size_t r = 0; r < episodes.size(); ++r) {
    const std::size_t e = episodes[r];
    if (e >= experts_.size()) throw ContractError("ExpertPolicy::act before begin()");
    if (!started_[e]) {
      experts_[e]->reset(rngs[r]);
      started_[e] = true;
    }
    const auto current = w.subspan((r * k + k - 1) * obs_dim_, obs_dim_);
    const std::vector<double> a = experts_[e]->act(current);
    out.insert(out.end(), a.begin(), a.end());
  }
  return Tensor({episodes.size(), act_dim_}, std::move(out));
}

Tensor RandomPolicy::act(const std::vector<std::size_t>& episodes, const Tensor&, std::vector<Rng>& rngs) {
  std::vector<double> out;
  out.reserve(episodes.size() * act_dim_);
  for (std::size_t r = 0; r < episodes.size(); ++r) {
    for (std::size_t c = 0; c < act_dim_; ++c) out.push_back(rngs[r].uniform(-scale_, scale_));
  }
  return Tensor({episodes.size(), act_dim_}, std::move(out));
}

RolloutReport rollout_evaluate(RolloutPolicy& policy, const ToyEnv& proto, std::size_t episodes,
                               std::uint64_t seed, double occlusion_rate) {
  if (episodes < 1) throw ContractError("rollout_evaluate needs at least one episode");
  OcclusionConfig{occlusion_rate, seed}.validate();
  if (policy.obs_dim() != proto.obs_dim() || policy.act_dim() != proto.act_dim()) {
    throw DimensionError("policy expects obs/act dims " + std::to_string(policy.obs_dim()) + "/" +
                         std::to_string(policy.act_dim()) + " but env '" + proto.task() + "' has " +
                         std::to_string(proto.obs_dim()) + "/" + std::to_string(proto.act_dim()));
  }
  const std::size_t k = policy.history();
  if (k < 1) throw ContractError("policy history must be at least 1");
  const std::size_t d = proto.obs_dim();

  std::vector<std::unique_ptr<ToyEnv>> envs;
  std::vector<Rng> policy_rngs, mask_rngs;
  std::vector<std::vector<double>> windows(episodes, std::vector<double>(k * d, 0.0));
  for (std::size_t e = 0; e < episodes; ++e) {
    envs.push_back(proto.clone());
    Rng reset_rng = Rng::derive(seed, 3 * e);
    envs.back()->reset(reset_rng);
    policy_rngs.push_back(Rng::derive(seed, 3 * e + 1));
    mask_rngs.push_back(Rng::derive(seed, 3 * e + 2));
  }
  const auto push_observation = [&](std::size_t e) {
    std::vector<double> o = envs[e]->observe();
    apply_occlusion_inplace(o, occlusion_rate, mask_rngs[e]);
    auto& w = windows[e];
    std::copy(w.begin() + static_cast<std::ptrdiff_t>(d), w.end(), w.begin());
    std::copy(o.begin(), o.end(), w.end() - static_cast<std::ptrdiff_t>(d));
  };
  for (std::size_t e = 0; e < episodes; ++e) push_observation(e);

  policy.begin(episodes);
  while (true) {
    std::vector<std::size_t> active;
    for (std::size_t e = 0; e < episodes; ++e) {
      if (!envs[e]->done()) active.push_back(e);
    }
    if (active.empty()) break;
    std::vector<double> flat;
    flat.reserve(active.size() * k * d);
    std::vector<Rng> rngs;
    rngs.reserve(active.size());
    for (std::size_t e : active) {
      flat.insert(flat.end(), windows[e].begin(), windows[e].end());
      rngs.push_back(policy_rngs[e]);
    }
    const Tensor actions = policy.act(active, Tensor({active.size(), k, d}, std::move(flat)), rngs);
    if (actions.rank() != 2 || actions.dim(0) != active.size() || actions.dim(1) != proto.act_dim()) {
      throw DimensionError("policy returned actions of shape " + to_string(actions.shape()));
    }
    const auto a = actions.data();
    const std::size_t ad = proto.act_dim();
    for (std::size_t r = 0; r < active.size(); ++r) {
      const std::size_t e = active[r];
      policy_rngs[e] = rngs[r];
      envs[e]->step(a.subspan(r * ad, ad));
      push_observation(e);
    }
  }

  RolloutReport report;
  std::size_t wins = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    EpisodeLog log{e, envs[e]->success(), envs[e]->steps(), envs[e]->state()};
    wins += log.success ? 1 : 0;
    report.episodes.push_back(std::move(log));
  }
  report.success_rate = static_cast<double>(wins) / static_cast<double>(episodes);
  return report;
}

}  // namespace mail
