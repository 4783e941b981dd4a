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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mail/harness.h"

using namespace mail;

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const std::string& kind, const std::string& msg) {
  std::cerr << "error: " << kind << ": " << one_line(msg) << "\n";
  return 1;
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump() << "\n"; }

nlohmann::ordered_json rows_json(const std::vector<AblationRow>& rows, const std::string& column) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : rows) out.push_back({{column, r.setting}, {"success_rate", r.success_rate}});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective state-space imitation learning toolkit"};
  app.require_subcommand(1);

  std::string task, out, config_path, out_dir, ckpt_path, data_path;
  std::size_t n = 100, k_needed = 3, episodes = 100;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;
  double occlusion = 0.0;
  bool pca = false;
  std::vector<double> rates, fractions;
  std::vector<std::string> config_paths;

  auto* gen = app.add_subcommand("gen-data", "Generate scripted demonstrations");
  gen->add_option("task", task, "multimodal_reach | delayed_cue | two_delta")->required();
  gen->add_option("--n", n, "Number of trajectories")->capture_default_str();
  gen->add_option("--seed", seed, "Generation seed")->capture_default_str();
  gen->add_option("--k-needed", k_needed, "Cue duration for delayed_cue")->capture_default_str();
  gen->add_option("--out", out, "Output dataset file")->required();

  auto* trn = app.add_subcommand("train", "Train a policy from a config file");
  trn->add_option("--config", config_path, "Flat key = value config")->required()->check(CLI::ExistingFile);
  trn->add_option("--out-dir", out_dir, "Directory for metrics.jsonl and checkpoints")->required();

  auto* ev = app.add_subcommand("eval", "Roll out a checkpoint");
  ev->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--episodes", episodes, "Episode count")->capture_default_str();
  ev->add_option("--seed", eval_seed, "Evaluation seed")->capture_default_str();
  ev->add_option("--occlusion", occlusion, "Observation occlusion rate")->capture_default_str();

  auto* occ = app.add_subcommand("ablate-occlusion", "Success rate against observation occlusion");
  occ->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  occ->add_option("--rates", rates, "Occlusion rates")->required();
  occ->add_option("--episodes", episodes, "Episodes per rate")->capture_default_str();
  occ->add_option("--seed", eval_seed, "Evaluation seed")->capture_default_str();
  occ->add_option("--out", out, "Output prefix for .csv and .dat tables");

  auto* dsz = app.add_subcommand("ablate-datasize", "Success rate against demonstration count");
  dsz->add_option("--config", config_path, "Training config")->required()->check(CLI::ExistingFile);
  dsz->add_option("--fractions", fractions, "Dataset fractions in (0, 1]")->required();
  dsz->add_option("--episodes", episodes, "Episodes per fraction")->capture_default_str();
  dsz->add_option("--seed", eval_seed, "Evaluation seed")->capture_default_str();
  dsz->add_option("--out", out, "Output prefix for .csv and .dat tables");

  auto* lat = app.add_subcommand("export-latents", "Write per-step latent vectors as CSV");
  lat->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  lat->add_option("--data", data_path, "Dataset file")->required()->check(CLI::ExistingFile);
  lat->add_option("--out", out, "Output CSV")->required();
  lat->add_flag("--pca", pca, "Append a two-component PCA projection");

  auto* par = app.add_subcommand("params", "Parameter counts, with the gap for a config pair");
  par->add_option("--config", config_paths, "One or two configs")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*gen) {
      if (seed > 0xffffffffULL) return fail("usage", "--seed must fit in 32 bits");
      const DemoDataset ds = generate_dataset(task, n, static_cast<std::uint32_t>(seed), k_needed);
      save_dataset(ds, out);
      print_json({{"task", ds.task}, {"trajectories", ds.size()}, {"steps", ds.total_steps()}, {"out", out}});
    } else if (*trn) {
      const TrainConfig cfg = load_config(config_path);
      TrainOptions opts;
      opts.out_dir = out_dir;
      opts.on_epoch = [](const EpochMetrics& m) { std::cout << metrics_line(m) << "\n" << std::flush; };
      const TrainResult r = train(cfg, opts);
      print_json({{"checkpoint", (std::filesystem::path(out_dir) / "final.ckpt").string()},
                  {"final_loss", r.metrics.back().loss}});
    } else if (*ev) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const RolloutReport rep = evaluate_checkpoint(ckpt, episodes, eval_seed, occlusion);
      print_json({{"success_rate", rep.success_rate}, {"episodes", episodes}, {"seed", eval_seed}, {"occlusion", occlusion}});
    } else if (*occ) {
      const auto rows = run_occlusion_ablation(load_checkpoint(ckpt_path), rates, episodes, eval_seed);
      if (!out.empty()) write_ablation(rows, "occlusion", out);
      print_json(rows_json(rows, "occlusion"));
    } else if (*dsz) {
      const TrainConfig cfg = load_config(config_path);
      if (cfg.dataset.empty()) return fail("config", "key 'dataset': required for ablate-datasize");
      const auto rows = run_datasize_ablation(cfg, load_dataset(cfg.dataset), fractions, episodes, eval_seed);
      if (!out.empty()) write_ablation(rows, "fraction", out);
      print_json(rows_json(rows, "fraction"));
    } else if (*lat) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const DemoDataset ds = load_dataset(data_path);
      export_latents(ckpt, ds, out, pca);
      print_json({{"rows", ds.total_steps()}, {"dim", ckpt.config.model_dim}, {"out", out}});
    } else if (*par) {
      if (config_paths.size() > 2) return fail("usage", "params takes one or two --config files");
      nlohmann::ordered_json report = nlohmann::ordered_json::array();
      std::vector<std::size_t> totals;
      for (const auto& path : config_paths) {
        const TrainConfig cfg = load_config(path);
        const ParameterCount pc = count_config_parameters(cfg);
        totals.push_back(pc.total);
        nlohmann::ordered_json modules = nlohmann::ordered_json::object();
        for (const auto& [name, count] : pc.by_module) modules[name] = count;
        report.push_back({{"config", path}, {"variant", to_string(cfg.variant)}, {"total", pc.total}, {"by_module", modules}});
      }
      nlohmann::ordered_json j{{"models", report}};
      if (totals.size() == 2) j["relative_gap"] = parity_gap(totals[0], totals[1]);
      print_json(j);
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what());
  } catch (const VersionError& e) {
    return fail("version", e.what());
  } catch (const ChecksumError& e) {
    return fail("checksum", e.what());
  } catch (const FormatError& e) {
    return fail("format", e.what());
  } catch (const NumericError& e) {
    return fail("numeric", e.what());
  } catch (const DimensionError& e) {
    return fail("dimension", e.what());
  } catch (const ContractError& e) {
    return fail("contract", e.what());
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
  return 0;
}
