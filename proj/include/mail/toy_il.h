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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mail/rng.h"
#include "mail/tensor.h"

namespace mail {

struct Trajectory {
  Tensor observations;  // [steps, obs_dim]
  Tensor actions;       // [steps, act_dim]
  Tensor conditioning;  // [cond_dim]; empty when cond_dim == 0
  bool success = false;

  std::size_t steps() const { return observations.dim(0); }
};

struct DemoDataset {
  std::string task;
  std::uint32_t seed = 0;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t cond_dim = 0;
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  std::size_t total_steps() const;
  void validate() const;
};

/// Deterministic point-mass style task; randomness enters only through reset.
class ToyEnv {
 public:
  virtual ~ToyEnv() = default;
  virtual std::string task() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t act_dim() const = 0;
  virtual std::size_t horizon() const = 0;
  virtual std::unique_ptr<ToyEnv> clone() const = 0;

  virtual void reset(Rng& rng) = 0;
  virtual std::vector<double> observe() const = 0;
  virtual void step(std::span<const double> action) = 0;
  virtual bool success() const = 0;
  /// Terminal failure before the horizon.
  virtual bool failed() const { return false; }
  /// Internal state (position and the like) for replay checks.
  virtual std::vector<double> state() const = 0;

  std::size_t steps() const { return steps_; }
  bool done() const { return success() || failed() || steps_ >= horizon(); }

 protected:
  std::size_t steps_ = 0;
};

/// Per-episode scripted demonstrator. It sees only observations, plus its own
/// rng for mode choices.
class ScriptedExpert {
 public:
  virtual ~ScriptedExpert() = default;
  virtual void reset(Rng& rng) = 0;
  virtual std::vector<double> act(std::span<const double> obs) = 0;
};

inline constexpr double kMaxStep = 0.1;
inline constexpr double kGoalRadius = 0.1;

/// Two goals at (+-1, 1); obs = (x, y, -1, 1, 1, 1); steps clipped to norm 0.1.
/// A disc obstacle sits between the start and the goals; touching it fails the
/// episode.
class MultimodalReachEnv final : public ToyEnv {
 public:
  std::string task() const override { return "multimodal_reach"; }
  std::size_t obs_dim() const override { return 6; }
  std::size_t act_dim() const override { return 2; }
  std::size_t horizon() const override { return 40; }
  std::unique_ptr<ToyEnv> clone() const override { return std::make_unique<MultimodalReachEnv>(*this); }
  void reset(Rng& rng) override;
  std::vector<double> observe() const override;
  void step(std::span<const double> action) override;
  bool success() const override;
  bool failed() const override;
  std::vector<double> state() const override { return {x_, y_}; }

  static constexpr double kObstacleY = 0.5;
  static constexpr double kObstacleRadius = 0.3;

 private:
  double x_ = 0.0, y_ = 0.0;
};

/// Target (cue, 1) with cue = +-1 shown in obs = (x, y, cue) only for the
/// first k_needed steps, during which the agent is held in place. Touching the
/// other target ends the episode as a failure.
class DelayedCueEnv final : public ToyEnv {
 public:
  explicit DelayedCueEnv(std::size_t k_needed = 3);
  std::string task() const override { return "delayed_cue"; }
  std::size_t obs_dim() const override { return 3; }
  std::size_t act_dim() const override { return 2; }
  std::size_t horizon() const override { return 40; }
  std::unique_ptr<ToyEnv> clone() const override { return std::make_unique<DelayedCueEnv>(*this); }
  void reset(Rng& rng) override;
  std::vector<double> observe() const override;
  void step(std::span<const double> action) override;
  bool success() const override { return success_; }
  bool failed() const override { return failed_; }
  std::vector<double> state() const override { return {x_, y_, cue_}; }

  std::size_t k_needed() const { return k_needed_; }

 private:
  std::size_t k_needed_;
  double x_ = 0.0, y_ = 0.0, cue_ = 1.0;
  bool success_ = false, failed_ = false;
};

/// One-step task with constant obs (1) whose demonstrations are a = +-1.
class TwoDeltaEnv final : public ToyEnv {
 public:
  std::string task() const override { return "two_delta"; }
  std::size_t obs_dim() const override { return 1; }
  std::size_t act_dim() const override { return 1; }
  std::size_t horizon() const override { return 1; }
  std::unique_ptr<ToyEnv> clone() const override { return std::make_unique<TwoDeltaEnv>(*this); }
  void reset(Rng& rng) override;
  std::vector<double> observe() const override { return {1.0}; }
  void step(std::span<const double> action) override;
  bool success() const override;
  std::vector<double> state() const override { return {last_}; }

 private:
  double last_ = 0.0;
};

/// Task names: multimodal_reach, delayed_cue, two_delta.
std::unique_ptr<ToyEnv> make_env(const std::string& task, std::size_t k_needed = 3);
std::unique_ptr<ScriptedExpert> make_expert(const std::string& task);

DemoDataset gen_multimodal_reach(std::size_t n, std::uint32_t seed);
DemoDataset gen_delayed_cue(std::size_t n, std::size_t k_needed, std::uint32_t seed);
DemoDataset gen_two_delta(std::size_t n, std::uint32_t seed);
DemoDataset generate_dataset(const std::string& task, std::size_t n, std::uint32_t seed,
                             std::size_t k_needed = 3);

/// Steps the env from the demo's seeded reset through the recorded actions and
/// returns the largest deviation between replayed and recorded observations.
/// Sets `success` to the replayed outcome.
double replay_trajectory(const ToyEnv& env, const Trajectory& traj, std::uint32_t dataset_seed,
                         std::size_t index, bool& success);

std::vector<std::uint8_t> serialize_dataset(const DemoDataset& ds);
DemoDataset deserialize_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const DemoDataset& ds, const std::string& path);
DemoDataset load_dataset(const std::string& path);

struct OcclusionConfig {
  double rate = 0.0;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Zeroes each coordinate independently with probability cfg.rate.
Tensor apply_occlusion(const Tensor& obs, const OcclusionConfig& cfg, Rng& rng);
void apply_occlusion_inplace(std::span<double> obs, double rate, Rng& rng);

/// ceil(fraction * n) trajectories drawn without replacement, kept in their
/// original order.
DemoDataset subsample_dataset(const DemoDataset& ds, double fraction, std::uint32_t seed);

/// Batched closed-loop controller. `act` receives the active episode ids, their
/// observation windows [B, K, obs_in] and their rng streams, and returns the
/// action to execute now for each row, [B, act_dim].
class RolloutPolicy {
 public:
  virtual ~RolloutPolicy() = default;
  virtual std::size_t history() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t act_dim() const = 0;
  virtual void begin(std::size_t /*episodes*/) {}
  virtual Tensor act(const std::vector<std::size_t>& episodes, const Tensor& windows,
                     std::vector<Rng>& rngs) = 0;
};

/// The task's scripted expert, one instance per episode.
class ExpertPolicy final : public RolloutPolicy {
 public:
  ExpertPolicy(const std::string& task, std::size_t obs_dim, std::size_t act_dim);
  std::size_t history() const override { return 1; }
  std::size_t obs_dim() const override { return obs_dim_; }
  std::size_t act_dim() const override { return act_dim_; }
  void begin(std::size_t episodes) override;
  Tensor act(const std::vector<std::size_t>& episodes, const Tensor& windows,
             std::vector<Rng>& rngs) override;

 private:
  std::string task_;
  std::size_t obs_dim_, act_dim_;
  std::vector<std::unique_ptr<ScriptedExpert>> experts_;
  std::vector<bool> started_;
};

/// Uniform actions in [-scale, scale] per coordinate.
class RandomPolicy final : public RolloutPolicy {
 public:
  RandomPolicy(std::size_t history, std::size_t obs_dim, std::size_t act_dim, double scale = kMaxStep)
      : history_(history), obs_dim_(obs_dim), act_dim_(act_dim), scale_(scale) {}
  std::size_t history() const override { return history_; }
  std::size_t obs_dim() const override { return obs_dim_; }
  std::size_t act_dim() const override { return act_dim_; }
  Tensor act(const std::vector<std::size_t>& episodes, const Tensor& windows,
             std::vector<Rng>& rngs) override;

 private:
  std::size_t history_, obs_dim_, act_dim_;
  double scale_;
};

struct EpisodeLog {
  std::size_t episode = 0;
  bool success = false;
  std::size_t steps = 0;
  std::vector<double> final_state;
};

struct RolloutReport {
  double success_rate = 0.0;
  std::vector<EpisodeLog> episodes;
};

/// Runs `episodes` seeded episodes in lockstep. Each episode owns independent
/// rng streams for its reset, its policy noise and its occlusion masks, so the
/// outcome of an episode does not depend on how many others run beside it.
RolloutReport rollout_evaluate(RolloutPolicy& policy, const ToyEnv& env, std::size_t episodes,
                               std::uint64_t seed, double occlusion_rate = 0.0);

}  // namespace mail
