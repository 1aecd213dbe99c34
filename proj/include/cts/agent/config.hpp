#pragma once

#include <cstdint>
#include <string>

#include "cts/agent/learning.hpp"
#include "cts/agent/qnet.hpp"
#include "cts/env/environment.hpp"

namespace cts::agent {

/// Every training constant. The network defaults to the small desk profile.
struct TrainerConfig {
  // [trainer]
  long max_turns = 1'500'000;
  int batch = 128;
  int train_freq = 3;
  long train_start = 1280;
  int target_update = 15;
  double epsilon_start = 0.6;
  double epsilon_end = 0.0;
  double exploration_fraction = 0.99;
  double lr = 1e-4;
  double max_grad_norm = 1.0;
  double lambda_intent = 1.0;
  MunchausenParams munchausen;
  double per_alpha = 0.6;
  double per_beta = 0.4;
  std::size_t buffer = 100000;
  bool her = true;
  long eval_freq = 10000;
  int eval_dialogs = 500;
  std::uint64_t seed = 0;
  // [net]
  std::string profile = "desk";
  NetProfile net;
  // [obs], [noise], [reward], [sim]
  int embedding_dim = 256;
  env::EnvConfig env = default_env();
  // [paths]
  std::string tree;
  std::string corpus;
  std::string embeddings;
  std::string output_dir = "runs";

  static env::EnvConfig default_env() {
    env::EnvConfig e;
    e.noise = 0.1;
    return e;
  }
};

/// Reads an INI document; unknown sections or keys raise ConfigError, and
/// keys left out keep their defaults. Relative [paths] are resolved against
/// `base_dir` when it is given.
TrainerConfig parse_config(const std::string& text, const std::string& base_dir = "");
TrainerConfig load_config(const std::string& path);
/// Throws ConfigError for out-of-range or inconsistent values.
void check_config(const TrainerConfig& config);
/// INI document that parse_config reads back to the same configuration.
std::string serialize_config(const TrainerConfig& config);
/// Hex digest of the serialized configuration.
std::string config_fingerprint(const TrainerConfig& config);

}  // namespace cts::agent
