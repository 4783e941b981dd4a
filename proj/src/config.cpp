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

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mail/harness.h"

namespace mail {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("key '" + key + "': expected a finite number, got '" + value + "'");
  }
  return v;
}

template <typename Fn>
auto rethrow_as_config(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define SIZE_FIELD(name)                                                                       \
  {                                                                                            \
    #name, {[](TrainConfig& c, const std::string& v) { c.name = to_size(#name, v); },           \
            [](const TrainConfig& c) { return std::to_string(c.name); }}                       \
  }
#define DOUBLE_FIELD(name)                                                                     \
  {                                                                                            \
    #name, {[](TrainConfig& c, const std::string& v) { c.name = to_double(#name, v); },         \
            [](const TrainConfig& c) { return format_double(c.name); }}                        \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"task", {[](TrainConfig& c, const std::string& v) { c.task = v; },
                [](const TrainConfig& c) { return c.task; }}},
      {"policy", {[](TrainConfig& c, const std::string& v) { c.policy = parse_policy_kind(v); },
                  [](const TrainConfig& c) { return to_string(c.policy); }}},
      {"variant", {[](TrainConfig& c, const std::string& v) { c.variant = parse_variant(v); },
                   [](const TrainConfig& c) { return to_string(c.variant); }}},
      SIZE_FIELD(history),
      SIZE_FIELD(horizon),
      SIZE_FIELD(action_steps),
      SIZE_FIELD(model_dim),
      SIZE_FIELD(state_dim),
      SIZE_FIELD(conv_width),
      SIZE_FIELD(depth),
      SIZE_FIELD(encoder_depth),
      SIZE_FIELD(decoder_depth),
      SIZE_FIELD(heads),
      SIZE_FIELD(ff_dim),
      SIZE_FIELD(epochs),
      SIZE_FIELD(batch_size),
      DOUBLE_FIELD(learning_rate),
      {"seed", {[](TrainConfig& c, const std::string& v) {
                  const std::size_t s = to_size("seed", v);
                  if (s > 0xffffffffULL) throw ConfigError("key 'seed': must fit in 32 bits");
                  c.seed = static_cast<std::uint32_t>(s);
                },
                [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      SIZE_FIELD(diffusion_steps),
      DOUBLE_FIELD(beta_start),
      DOUBLE_FIELD(beta_end),
      {"noise_rule", {[](TrainConfig& c, const std::string& v) { c.noise_rule = parse_noise_rule(v); },
                      [](const TrainConfig& c) { return to_string(c.noise_rule); }}},
      {"dataset", {[](TrainConfig& c, const std::string& v) { c.dataset = v; },
                   [](const TrainConfig& c) { return c.dataset; }}},
      DOUBLE_FIELD(occlusion),
      {"scan_mode", {[](TrainConfig& c, const std::string& v) { c.scan_mode = parse_scan_mode(v); },
                     [](const TrainConfig& c) { return to_string(c.scan_mode); }}},
      SIZE_FIELD(eval_episodes),
      SIZE_FIELD(eval_every),
      SIZE_FIELD(checkpoint_every),
      SIZE_FIELD(k_needed),
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD

}  // namespace

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "BC" || name == "bc") return PolicyKind::kBC;
  if (name == "DDP" || name == "ddp") return PolicyKind::kDDP;
  throw ConfigError("unknown policy '" + name + "' (expected BC or DDP)");
}

std::string to_string(PolicyKind kind) { return kind == PolicyKind::kBC ? "BC" : "DDP"; }

void TrainConfig::validate() const {
  rethrow_as_config("task", [&] { return make_env(task, k_needed); });
  if (history < 1) throw ConfigError("key 'history': must be at least 1");
  if (horizon < 1) throw ConfigError("key 'horizon': must be at least 1");
  if (action_steps < 1 || action_steps > horizon) {
    throw ConfigError("key 'action_steps': must lie in [1, horizon]");
  }
  if (epochs < 1) throw ConfigError("key 'epochs': must be at least 1");
  if (batch_size < 1) throw ConfigError("key 'batch_size': must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("key 'learning_rate': must be positive");
  if (!(occlusion >= 0.0 && occlusion <= 1.0)) throw ConfigError("key 'occlusion': must lie in [0, 1]");
  if (eval_every > 0 && eval_episodes == 0) throw ConfigError("key 'eval_episodes': must be positive when eval_every is set");
  rethrow_as_config("beta_start", [&] { return make_noise_schedule(diffusion_steps, beta_start, beta_end); });
  rethrow_as_config("variant", [&] {
    network().validate();
    return 0;
  });
}

PolicyNetworkConfig TrainConfig::network() const {
  const auto e = env();
  PolicyNetworkConfig n;
  n.variant = variant;
  n.model_dim = model_dim;
  n.state_dim = state_dim;
  n.conv_width = conv_width;
  n.depth = depth;
  n.encoder_depth = encoder_depth;
  n.decoder_depth = decoder_depth;
  n.heads = heads;
  n.ff_dim = ff_dim;
  n.history = history;
  n.horizon = horizon;
  n.obs_dim = e->obs_dim();
  n.cond_dim = 0;
  n.act_dim = e->act_dim();
  n.diffusion_steps = diffusion_steps;
  n.scan_mode = scan_mode;
  return n;
}

NoiseSchedule TrainConfig::schedule() const { return make_noise_schedule(diffusion_steps, beta_start, beta_end); }

std::unique_ptr<ToyEnv> TrainConfig::env() const { return make_env(task, k_needed); }

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::map<std::string, const Field*> by_name;
  for (const auto& [name, field] : fields()) by_name[name] = &field;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_name.find(key);
    if (it == by_name.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (seen.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(seen[key]) + ")");
    }
    seen[key] = line_no;
    rethrow_as_config(key, [&] {
      it->second->set(cfg, value);
      return 0;
    });
  }
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  TrainConfig cfg = parse_config(ss.str());
  // Relative dataset paths are taken from the config file's directory.
  const std::filesystem::path data(cfg.dataset);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  if (!cfg.dataset.empty() && data.is_relative() && !base.empty()) cfg.dataset = (base / data).string();
  return cfg;
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

}  // namespace mail
