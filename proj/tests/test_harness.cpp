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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mail/harness.h"

using namespace mail;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mail_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TrainConfig tiny(const std::string& task, PolicyKind policy, Variant variant) {
  TrainConfig c;
  c.task = task;
  c.policy = policy;
  c.variant = variant;
  c.history = 2;
  c.horizon = 2;
  c.model_dim = 8;
  c.state_dim = 4;
  c.conv_width = 2;
  c.depth = 1;
  c.encoder_depth = 1;
  c.decoder_depth = 1;
  c.heads = 2;
  c.ff_dim = 16;
  c.epochs = 2;
  c.batch_size = 16;
  c.learning_rate = 3e-3;
  c.seed = 3;
  c.scan_mode = ScanMode::kSequential;
  return c;
}

// Single-step episodes whose action copies the observation.
DemoDataset copy_dataset(std::size_t n, std::uint32_t seed) {
  DemoDataset ds;
  ds.task = "two_delta";
  ds.seed = seed;
  ds.obs_dim = 1;
  ds.act_dim = 1;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    Trajectory t;
    t.observations = Tensor({1, 1}, {u});
    t.actions = Tensor({1, 1}, {u});
    t.success = true;
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config text round trips and rejects bad input") {
  TrainConfig c = tiny("delayed_cue", PolicyKind::kBC, Variant::kEDTr);
  c.learning_rate = 0.1 + 0.2;
  c.dataset = "data/cue.bin";
  c.noise_rule = NoiseRule::kPaper;
  const std::string text = serialize_config(c);
  const TrainConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.variant == Variant::kEDTr);
  CHECK(back.policy == PolicyKind::kBC);

  const TrainConfig commented = parse_config("# comment\n\n  epochs = 7   # trailing\nvariant=ed_ma\n");
  CHECK(commented.epochs == 7);
  CHECK(commented.variant == Variant::kEDMa);

  CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = 3x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("learning_rate = nan\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = 3\nepochs = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("variant = D-Xx\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = 4294967296\n"), ConfigError);

  TrainConfig bad = c;
  bad.action_steps = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.task = "nope";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.occlusion = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.beta_end = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  const Tensor w = Tensor::parameter({3}, {1.0, -2.0, 0.5});
  AdamState st;
  for (int i = 0; i < 5; ++i) optimizer_step({w}, {Tensor::zeros({3})}, st, 0.1);
  CHECK(w.data()[0] == 1.0);
  CHECK(w.data()[1] == -2.0);
  CHECK(w.data()[2] == 0.5);
}

TEST_CASE("adam first step moves by lr against the gradient sign") {
  const Tensor w = Tensor::parameter({2}, {0.0, 0.0});
  AdamState st;
  optimizer_step({w}, {Tensor({2}, {3.7, -0.02})}, st, 0.01);
  CHECK(w.data()[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(w.data()[1] == doctest::Approx(0.01).epsilon(1e-5));
}

TEST_CASE("adam minimizes a quadratic bowl") {
  const Tensor w = Tensor::parameter({1}, {1.0});
  AdamState st;
  for (int i = 0; i < 500; ++i) optimizer_step({w}, {Tensor({1}, {2.0 * w.data()[0]})}, st, 0.05);
  CHECK(std::abs(w.data()[0]) < 1e-3);
}

TEST_CASE("adam rejects mismatched gradients") {
  const Tensor w = Tensor::parameter({2}, {0.0, 0.0});
  AdamState st;
  CHECK_THROWS_AS(optimizer_step({w}, {Tensor::zeros({3})}, st, 0.1), DimensionError);
  CHECK_THROWS_AS(optimizer_step({w}, {}, st, 0.1), DimensionError);
}

TEST_CASE("training windows pad the history and the action chunk with zeros") {
  DemoDataset ds;
  ds.task = "two_delta";
  ds.obs_dim = 1;
  ds.act_dim = 1;
  Trajectory t;
  t.observations = Tensor({3, 1}, {10.0, 20.0, 30.0});
  t.actions = Tensor({3, 1}, {1.0, 2.0, 3.0});
  ds.trajectories.push_back(t);
  const WindowedSamples s = make_windowed_samples(ds, 2, 2);
  REQUIRE(s.count() == 3);
  CHECK(s.windows == std::vector<double>{0.0, 10.0, 10.0, 20.0, 20.0, 30.0});
  CHECK(s.chunks == std::vector<double>{1.0, 2.0, 2.0, 3.0, 3.0, 0.0});
  CHECK(action_scale(ds) == std::vector<double>{3.0});
}

TEST_CASE("BC fits the copy task") {
  TrainConfig c = tiny("two_delta", PolicyKind::kBC, Variant::kDMa);
  c.history = 1;
  c.horizon = 1;
  c.model_dim = 16;
  c.epochs = 200;
  c.batch_size = 32;
  c.learning_rate = 3e-3;
  const TrainResult r = train(c, copy_dataset(200, 1));
  CHECK(r.metrics.back().loss < 1e-3);
}

TEST_CASE("training is bitwise reproducible") {
  const DemoDataset ds = gen_multimodal_reach(8, 2);
  TrainConfig c = tiny("multimodal_reach", PolicyKind::kDDP, Variant::kEDMa);
  c.occlusion = 0.2;
  const TrainResult a = train(c, ds);
  const TrainResult b = train(c, ds);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) CHECK(a.metrics[i].loss == b.metrics[i].loss);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  c.seed = 4;
  CHECK(train(c, ds).metrics[0].loss != a.metrics[0].loss);
}

TEST_CASE("loss decreases for every variant") {
  const DemoDataset ds = gen_multimodal_reach(10, 3);
  for (Variant v : {Variant::kDMa, Variant::kEDMa, Variant::kDTr, Variant::kEDTr}) {
    TrainConfig c = tiny("multimodal_reach", PolicyKind::kDDP, v);
    c.epochs = 20;
    const TrainResult r = train(c, ds);
    INFO(to_string(v));
    CHECK(r.metrics.back().loss < r.metrics.front().loss);
  }
}

TEST_CASE("non-finite values abort training with the batch index") {
  DemoDataset ds = copy_dataset(40, 2);
  ds.trajectories[5].observations.mutable_data()[0] = std::nan("");
  TrainConfig c = tiny("two_delta", PolicyKind::kBC, Variant::kDMa);
  c.history = 1;
  c.horizon = 1;
  c.batch_size = 64;
  try {
    train(c, ds);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
  }

  // A diverging run trips the loss check itself.
  TrainConfig wild = tiny("two_delta", PolicyKind::kBC, Variant::kDTr);
  wild.history = 1;
  wild.horizon = 1;
  wild.batch_size = 8;
  wild.epochs = 50;
  wild.learning_rate = 1e300;
  try {
    train(wild, copy_dataset(40, 2));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("non-finite loss") != std::string::npos);
    CHECK(std::string(e.what()).find("batch ") != std::string::npos);
  }
}

TEST_CASE("training rejects a dataset for another task") {
  const DemoDataset ds = gen_two_delta(10, 1);
  CHECK_THROWS_AS(train(tiny("multimodal_reach", PolicyKind::kBC, Variant::kDMa), ds), ContractError);
}

TEST_CASE("metrics and checkpoints land in the output directory") {
  const auto dir = scratch_dir("out");
  TrainConfig c = tiny("delayed_cue", PolicyKind::kBC, Variant::kDTr);
  c.epochs = 3;
  c.eval_every = 2;
  c.eval_episodes = 4;
  c.checkpoint_every = 2;
  TrainOptions opts;
  opts.out_dir = dir.string();
  const TrainResult r = train(c, gen_delayed_cue(6, 3, 1), opts);
  CHECK(std::filesystem::exists(dir / "final.ckpt"));
  CHECK(std::filesystem::exists(dir / "epoch_2.ckpt"));
  std::istringstream lines(read_text(dir / "metrics.jsonl"));
  std::string line;
  std::vector<nlohmann::json> records;
  while (std::getline(lines, line)) records.push_back(nlohmann::json::parse(line));
  REQUIRE(records.size() == 4);
  CHECK(records[0]["type"] == "config");
  CHECK(records[0]["config"]["variant"] == "D-Tr");
  CHECK(parse_config(serialize_config(c)).epochs == 3);
  for (std::size_t e = 1; e <= 3; ++e) {
    CHECK(records[e]["epoch"] == e);
    CHECK(records[e]["loss"].get<double>() == r.metrics[e - 1].loss);
    CHECK(records[e]["param_count"].get<std::size_t>() == r.metrics[e - 1].param_count);
  }
  CHECK(records[1]["eval_success"].is_null());
  CHECK(records[2]["eval_success"].is_number());
  CHECK(serialize_checkpoint(load_checkpoint((dir / "final.ckpt").string())) == serialize_checkpoint(r.checkpoint));
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoints round trip and detect damage") {
  const TrainResult r = train(tiny("multimodal_reach", PolicyKind::kBC, Variant::kEDMa), gen_multimodal_reach(4, 1));
  const auto bytes = serialize_checkpoint(r.checkpoint);
  CHECK(std::string(bytes.begin(), bytes.begin() + 7) == "MAILCK1");
  CHECK(bytes[7] == kCheckpointVersion);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  REQUIRE(back.tensors.size() == r.checkpoint.tensors.size());
  for (std::size_t i = 0; i < back.tensors.size(); ++i) {
    CHECK(back.tensors[i].name == r.checkpoint.tensors[i].name);
    const auto x = back.tensors[i].tensor.data();
    const auto y = r.checkpoint.tensors[i].tensor.data();
    CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
  CHECK(back.rng_state == r.checkpoint.rng_state);
  CHECK(back.tensors.back().name == kActionScaleBuffer);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), ChecksumError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), ChecksumError);
  auto version = bytes;
  version[7] = 2;
  CHECK_THROWS_AS(deserialize_checkpoint(version), VersionError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(magic), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 6)), FormatError);

  Checkpoint missing = r.checkpoint;
  missing.tensors.erase(missing.tensors.begin());
  CHECK_THROWS_AS(TrainedPolicy{missing}, FormatError);
}

TEST_CASE("evaluation after reload matches the original") {
  const auto dir = scratch_dir("reload");
  TrainConfig c = tiny("multimodal_reach", PolicyKind::kDDP, Variant::kDMa);
  c.epochs = 3;
  const TrainResult r = train(c, gen_multimodal_reach(6, 1));
  const std::string path = (dir / "m.ckpt").string();
  save_checkpoint(r.checkpoint, path);
  const Checkpoint loaded = load_checkpoint(path);
  const RolloutReport before = evaluate_checkpoint(r.checkpoint, 6, 11);
  const RolloutReport after = evaluate_checkpoint(loaded, 6, 11);
  for (std::size_t e = 0; e < 6; ++e) CHECK(before.episodes[e].final_state == after.episodes[e].final_state);
  CHECK(before.success_rate == after.success_rate);
  std::filesystem::remove_all(dir);
}

TEST_CASE("trained policy executes queued chunk actions before replanning") {
  TrainConfig c = tiny("multimodal_reach", PolicyKind::kBC, Variant::kDMa);
  c.horizon = 3;
  c.action_steps = 2;
  const TrainResult r = train(c, gen_multimodal_reach(4, 1));
  TrainedPolicy policy(r.checkpoint);
  Rng rng(1);
  std::vector<double> w(2 * 6);
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  const Tensor window({1, 2, 6}, w);
  std::vector<Rng> rngs{Rng(5)};
  const Tensor chunk = policy.predict_chunk(window, rngs);
  policy.begin(1);
  const Tensor first = policy.act({0}, window, rngs);
  const Tensor second = policy.act({0}, Tensor::zeros({1, 2, 6}), rngs);
  const Tensor third = policy.act({0}, window, rngs);
  const auto cd = chunk.data();
  CHECK(first.data()[0] == cd[0]);
  CHECK(first.data()[1] == cd[1]);
  CHECK(second.data()[0] == cd[2]);
  CHECK(second.data()[1] == cd[3]);
  CHECK(third.data()[0] == cd[0]);
}

TEST_CASE("occlusion ablation at rate zero equals plain evaluation") {
  const auto dir = scratch_dir("abl");
  TrainConfig c = tiny("delayed_cue", PolicyKind::kBC, Variant::kDMa);
  const TrainResult r = train(c, gen_delayed_cue(6, 3, 2));
  const auto rows = run_occlusion_ablation(r.checkpoint, {0.0, 1.0}, 20, 4);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].success_rate == evaluate_checkpoint(r.checkpoint, 20, 4).success_rate);
  CHECK(rows[1].success_rate <= 0.6);
  write_ablation(rows, "occlusion", (dir / "occ").string());
  CHECK(read_text(dir / "occ.csv").rfind("occlusion,success_rate\n0,", 0) == 0);
  CHECK(read_text(dir / "occ.dat").rfind("# occlusion success_rate\n", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset size ablation returns sorted rows and matches a plain run at full size") {
  TrainConfig c = tiny("two_delta", PolicyKind::kBC, Variant::kDMa);
  c.history = 1;
  c.horizon = 1;
  const DemoDataset ds = gen_two_delta(20, 3);
  const auto rows = run_datasize_ablation(c, ds, {1.0, 0.5}, 10, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].setting == 0.5);
  CHECK(rows[1].setting == 1.0);
  CHECK(rows[1].success_rate == evaluate_checkpoint(train(c, ds).checkpoint, 10, 2).success_rate);
}

TEST_CASE("latent export covers every step at model width") {
  const auto dir = scratch_dir("lat");
  TrainConfig c = tiny("delayed_cue", PolicyKind::kDDP, Variant::kEDMa);
  const DemoDataset ds = gen_delayed_cue(5, 3, 2);
  const TrainResult r = train(c, ds);
  const LatentExport lat = compute_latents(TrainedPolicy(r.checkpoint), ds, true);
  CHECK(lat.rows == ds.total_steps());
  CHECK(lat.dim == c.model_dim);
  CHECK(lat.explained[0] > 0.0);
  CHECK(lat.explained[1] > 0.0);
  CHECK(lat.explained[0] >= lat.explained[1]);
  const LatentExport again = compute_latents(TrainedPolicy(r.checkpoint), ds, true);
  CHECK(again.projection == lat.projection);

  const std::string path = (dir / "lat.csv").string();
  export_latents(r.checkpoint, ds, path, true);
  std::istringstream lines(read_text(path));
  std::string line;
  std::getline(lines, line);
  CHECK(line.rfind("trajectory,step,z0,", 0) == 0);
  CHECK(line.substr(line.size() - 8) == ",pc1,pc2");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) == 2 + c.model_dim + 1);
  }
  CHECK(rows == ds.total_steps());
  CHECK_THROWS_AS(compute_latents(TrainedPolicy(r.checkpoint), gen_two_delta(3, 1), false), DimensionError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pca recovers a planted plane") {
  // Points on span{(1,1,0,0), (0,0,1,0)} with uncorrelated coordinates of
  // unequal spread.
  const std::size_t n = 200;
  std::vector<double> data;
  std::vector<double> s(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    s[i] = 3.0 * std::cos(angle);
    t[i] = 0.5 * std::sin(angle);
    data.insert(data.end(), {s[i] / std::sqrt(2.0) + 1.0, s[i] / std::sqrt(2.0) - 2.0, t[i], 4.0});
  }
  std::vector<double> proj, explained;
  pca_project(data, n, 4, proj, explained);
  double ms = 0, mt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ms += s[i] / n;
    mt += t[i] / n;
  }
  double var_s = 0, var_t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(proj[2 * i] - (s[i] - ms)) < 1e-9);
    CHECK(std::abs(std::abs(proj[2 * i + 1]) - std::abs(t[i] - mt)) < 1e-9);
    var_s += (s[i] - ms) * (s[i] - ms) / (n - 1);
    var_t += (t[i] - mt) * (t[i] - mt) / (n - 1);
  }
  CHECK(explained[0] == doctest::Approx(var_s).epsilon(1e-9));
  CHECK(explained[1] == doctest::Approx(var_t).epsilon(1e-9));
  CHECK_THROWS_AS(pca_project({}, 0, 4, proj, explained), DimensionError);
}
