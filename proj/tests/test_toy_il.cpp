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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <vector>

#include "doctest.h"
#include "mail/binary_io.h"
#include "mail/toy_il.h"

using namespace mail;

namespace {

std::size_t reach_goal_sign(const Trajectory& t) {
  const auto obs = t.observations.data();
  const auto act = t.actions.data();
  const std::size_t last = t.steps() - 1;
  return obs[last * 6] + act[last * 2] > 0.0 ? 1 : 0;
}

// Memoryless policy driven by the current observation only.
class MemorylessPolicy final : public RolloutPolicy {
 public:
  using Rule = std::function<std::vector<double>(std::span<const double>, Rng&)>;
  MemorylessPolicy(std::size_t obs_dim, std::size_t act_dim, Rule rule)
      : obs_dim_(obs_dim), act_dim_(act_dim), rule_(std::move(rule)) {}
  std::size_t history() const override { return 1; }
  std::size_t obs_dim() const override { return obs_dim_; }
  std::size_t act_dim() const override { return act_dim_; }
  Tensor act(const std::vector<std::size_t>& episodes, const Tensor& windows, std::vector<Rng>& rngs) override {
    const auto w = windows.data();
    std::vector<double> out;
    for (std::size_t r = 0; r < episodes.size(); ++r) {
      const auto a = rule_(w.subspan(r * obs_dim_, obs_dim_), rngs[r]);
      out.insert(out.end(), a.begin(), a.end());
    }
    return Tensor({episodes.size(), act_dim_}, std::move(out));
  }

 private:
  std::size_t obs_dim_, act_dim_;
  Rule rule_;
};

std::vector<double> toward(double gx, double gy, std::span<const double> o) {
  double dx = gx - o[0], dy = gy - o[1];
  const double n = std::hypot(dx, dy);
  if (n > kMaxStep) {
    dx *= kMaxStep / n;
    dy *= kMaxStep / n;
  }
  return {dx, dy};
}

}  // namespace

TEST_CASE("multimodal reach datasets are byte-identical for a fixed seed") {
  const auto a = serialize_dataset(gen_multimodal_reach(100, 7));
  const auto b = serialize_dataset(gen_multimodal_reach(100, 7));
  CHECK(a == b);
  CHECK(a != serialize_dataset(gen_multimodal_reach(100, 8)));
  CHECK_THROWS_AS(gen_multimodal_reach(1, 7), ContractError);
}

TEST_CASE("multimodal reach modes are balanced") {
  for (std::uint32_t seed : {1u, 2u, 3u}) {
    const DemoDataset ds = gen_multimodal_reach(100, seed);
    std::size_t right = 0;
    for (const auto& t : ds.trajectories) right += reach_goal_sign(t);
    CHECK(right >= 40);
    CHECK(right <= 60);
  }
}

TEST_CASE("expert trajectories replay exactly and succeed") {
  for (const std::string task : {"multimodal_reach", "delayed_cue", "two_delta"}) {
    const DemoDataset ds = generate_dataset(task, 50, 11);
    const auto env = make_env(task);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(ds.trajectories[i].success);
      bool ok = false;
      CHECK(replay_trajectory(*env, ds.trajectories[i], ds.seed, i, ok) <= 1e-9);
      CHECK(ok);
    }
  }
}

TEST_CASE("delayed cue is visible only before k_needed") {
  for (std::size_t k : {2, 3, 5}) {
    const DemoDataset ds = gen_delayed_cue(40, k, 3);
    std::size_t plus = 0;
    for (const auto& t : ds.trajectories) {
      const auto obs = t.observations.data();
      const double cue = obs[2];
      CHECK(std::abs(cue) == 1.0);
      plus += cue > 0 ? 1 : 0;
      for (std::size_t s = 0; s < t.steps(); ++s) {
        if (s < k) {
          CHECK(obs[s * 3 + 2] == cue);
        } else {
          CHECK(obs[s * 3 + 2] == 0.0);
        }
      }
      // The agent is held in place while the cue is shown.
      CHECK(obs[(k - 1) * 3] == obs[0]);
    }
    CHECK(plus > 5);
    CHECK(plus < 35);
  }
  CHECK_THROWS_AS(gen_delayed_cue(10, 1, 3), ContractError);
}

TEST_CASE("two delta demonstrations are plus or minus one") {
  const DemoDataset ds = gen_two_delta(500, 4);
  std::size_t plus = 0;
  for (const auto& t : ds.trajectories) {
    REQUIRE(t.steps() == 1);
    CHECK(t.observations.data()[0] == 1.0);
    const double a = t.actions.data()[0];
    CHECK(std::abs(a) == 1.0);
    plus += a > 0 ? 1 : 0;
  }
  CHECK(plus > 200);
  CHECK(plus < 300);
}

TEST_CASE("dataset files round trip and reject corruption") {
  const DemoDataset ds = gen_delayed_cue(12, 3, 5);
  const auto bytes = serialize_dataset(ds);
  CHECK(std::string(bytes.begin(), bytes.begin() + 7) == "MAILDS1");
  const DemoDataset back = deserialize_dataset(bytes);
  CHECK(back.task == "delayed_cue");
  CHECK(back.seed == 5);
  CHECK(back.obs_dim == 3);
  CHECK(back.act_dim == 2);
  CHECK(serialize_dataset(back) == bytes);

  const auto path = (std::filesystem::temp_directory_path() / "mail_test_ds" / "d.bin").string();
  save_dataset(ds, path);
  CHECK(serialize_dataset(load_dataset(path)) == bytes);
  std::filesystem::remove_all(std::filesystem::path(path).parent_path());

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_dataset(truncated), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_dataset(bad_magic), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_dataset(trailing), FormatError);
}

TEST_CASE("occlusion masks coordinates at the requested rate") {
  Rng data_rng(1);
  std::vector<double> raw(100000);
  for (double& v : raw) v = data_rng.uniform(0.5, 1.5);
  const Tensor obs({1000, 100}, raw);

  Rng rng(2);
  const Tensor same = apply_occlusion(obs, {0.0, 0}, rng);
  const auto s = same.data();
  CHECK(std::equal(s.begin(), s.end(), raw.begin()));

  const Tensor none = apply_occlusion(obs, {1.0, 0}, rng);
  for (double v : none.data()) CHECK(v == 0.0);

  const Tensor masked = apply_occlusion(obs, {0.3, 0}, rng);
  const auto m = masked.data();
  std::size_t zeros = 0;
  double sum_masked = 0.0, sum_raw = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    zeros += m[i] == 0.0 ? 1 : 0;
    sum_masked += m[i];
    sum_raw += raw[i];
  }
  CHECK(std::abs(static_cast<double>(zeros) / 1e5 - 0.3) <= 0.01);
  CHECK(std::abs(sum_masked / sum_raw - 0.7) <= 0.01);

  const Tensor again = apply_occlusion(obs, {0.3, 0}, rng);
  const auto g = again.data();
  CHECK_FALSE(std::equal(g.begin(), g.end(), m.begin()));

  CHECK_THROWS_AS(apply_occlusion(obs, {-0.1, 0}, rng), ContractError);
  CHECK_THROWS_AS(apply_occlusion(obs, {1.5, 0}, rng), ContractError);
}

TEST_CASE("subsampling keeps order and the requested count") {
  const DemoDataset ds = gen_multimodal_reach(100, 9);
  const auto full = subsample_dataset(ds, 1.0, 3);
  CHECK(serialize_dataset(full) == serialize_dataset(ds));

  const auto fifth = subsample_dataset(ds, 0.2, 3);
  CHECK(fifth.size() == 20);
  CHECK(subsample_dataset(ds, 0.015, 3).size() == 2);

  const auto other = subsample_dataset(ds, 0.2, 4);
  CHECK(serialize_dataset(fifth) != serialize_dataset(other));
  CHECK(serialize_dataset(fifth) == serialize_dataset(subsample_dataset(ds, 0.2, 3)));

  CHECK_THROWS_AS(subsample_dataset(ds, 0.0, 3), ContractError);
  CHECK_THROWS_AS(subsample_dataset(ds, 1.1, 3), ContractError);
  DemoDataset empty = ds;
  empty.trajectories.clear();
  CHECK_THROWS_AS(subsample_dataset(empty, 0.5, 3), ContractError);
}

TEST_CASE("scripted expert solves every task in closed loop") {
  for (const std::string task : {"multimodal_reach", "delayed_cue", "two_delta"}) {
    const auto env = make_env(task);
    ExpertPolicy expert(task, env->obs_dim(), env->act_dim());
    CHECK(rollout_evaluate(expert, *env, 100, 21).success_rate == 1.0);
  }
}

TEST_CASE("random actions rarely reach a goal") {
  const auto env = make_env("multimodal_reach");
  RandomPolicy random(1, env->obs_dim(), env->act_dim());
  CHECK(rollout_evaluate(random, *env, 200, 5).success_rate <= 0.1);
}

TEST_CASE("rollouts are deterministic and independent of batch size") {
  const auto env = make_env("multimodal_reach");
  RandomPolicy random(3, env->obs_dim(), env->act_dim(), 0.3);
  const auto a = rollout_evaluate(random, *env, 30, 8, 0.2);
  const auto b = rollout_evaluate(random, *env, 30, 8, 0.2);
  const auto c = rollout_evaluate(random, *env, 10, 8, 0.2);
  REQUIRE(a.episodes.size() == 30);
  for (std::size_t e = 0; e < 30; ++e) {
    CHECK(a.episodes[e].success == b.episodes[e].success);
    CHECK(a.episodes[e].steps == b.episodes[e].steps);
    CHECK(a.episodes[e].final_state == b.episodes[e].final_state);
    if (e < 10) CHECK(a.episodes[e].final_state == c.episodes[e].final_state);
  }
}

TEST_CASE("rollout rejects dimension mismatches") {
  const auto env = make_env("delayed_cue");
  RandomPolicy wrong_obs(1, 6, 2);
  CHECK_THROWS_AS(rollout_evaluate(wrong_obs, *env, 1, 0), DimensionError);
  RandomPolicy wrong_act(1, 3, 1);
  CHECK_THROWS_AS(rollout_evaluate(wrong_act, *env, 1, 0), DimensionError);
  RandomPolicy ok(1, 3, 2);
  CHECK_THROWS_AS(rollout_evaluate(ok, *env, 0, 0), ContractError);
}

TEST_CASE("windows are zero padded at episode start") {
  class Probe final : public RolloutPolicy {
   public:
    std::size_t history() const override { return 4; }
    std::size_t obs_dim() const override { return 3; }
    std::size_t act_dim() const override { return 2; }
    Tensor act(const std::vector<std::size_t>& episodes, const Tensor& windows, std::vector<Rng>&) override {
      if (calls++ == 0) {
        const auto w = windows.data();
        for (std::size_t i = 0; i < 9; ++i) padded = padded && w[i] == 0.0;
        current_cue = w[11];
      }
      return Tensor::zeros({episodes.size(), 2});
    }
    std::size_t calls = 0;
    bool padded = true;
    double current_cue = 0.0;
  } probe;
  const auto env = make_env("delayed_cue");
  rollout_evaluate(probe, *env, 1, 3);
  CHECK(probe.padded);
  CHECK(std::abs(probe.current_cue) == 1.0);
}

TEST_CASE("no single-observation policy solves delayed cue") {
  const auto env = make_env("delayed_cue");
  std::vector<MemorylessPolicy::Rule> rules = {
      [](std::span<const double> o, Rng&) { return toward(1.0, 1.0, o); },
      [](std::span<const double> o, Rng&) { return toward(o[0] >= 0.0 ? 1.0 : -1.0, 1.0, o); },
      [](std::span<const double> o, Rng&) { return toward(o[2] != 0.0 ? o[2] : (o[0] >= 0 ? 1.0 : -1.0), 1.0, o); },
      [](std::span<const double> o, Rng& rng) {
        return toward(std::abs(o[0]) > 0.05 ? (o[0] > 0 ? 1.0 : -1.0) : (rng.uniform() < 0.5 ? -1.0 : 1.0), 1.0, o);
      },
  };
  for (auto& rule : rules) {
    MemorylessPolicy policy(3, 2, rule);
    CHECK(rollout_evaluate(policy, *env, 400, 17).success_rate <= 0.6);
  }
}
