#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geli/losses.hpp"
#include "geli/policy.hpp"
#include "geli/reward_net.hpp"
#include "geli/synth.hpp"

namespace geli {

/// Reward-training recipes. GE_* methods learn from the session return
/// alone, LI_ONLY from the per-turn proxy labels alone, GELI_RRD_VA from
/// the weighted combination of both.
enum class Method { kGeRrd, kGeIrcr, kGeRudder, kLiOnly, kGeliRrdVa };

const std::vector<Method>& all_methods();
std::string method_name(Method method);
Method parse_method(const std::string& name);

/// True for methods whose objective consumes mm labels.
bool method_uses_labels(Method method);

struct RewardTrainConfig {
  double lr = 5e-6;
  /// Trajectories per optimizer step. When unset, label-bearing methods
  /// default to 32 and pure-GE methods to 1.
  std::optional<std::size_t> batch_size;
  std::size_t epochs = 40;
  /// Log test-split metrics every this many epochs (0 disables).
  std::size_t eval_every = 10;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 2;
  Activation activation = Activation::kTanh;
  double weight_decay = 0.0;
  IrcrNorm ircr_norm = IrcrNorm::kMinMax;
};

std::size_t resolve_batch_size(const RewardTrainConfig& cfg, Method method);

/// PPO hyperparameters plus the orchestration knobs around them.
struct PpoRunConfig {
  PPOConfig ppo;
  std::size_t iterations = 200;
  std::size_t num_actions = 8;
  std::size_t eval_episodes = 64;
};

struct PathsConfig {
  /// Empty means: fall back to the GELI_WORKDIR environment variable.
  std::string workdir;
  /// The remaining paths default to locations inside the workdir.
  std::string dataset;
  std::string checkpoints;
  std::string reports;
};

struct ExperimentConfig {
  EnvConfig env;
  std::array<double, 3> split_fractions{0.8, 0.08, 0.12};
  std::uint64_t split_seed = 0;
  GeliConfig geli;
  RewardTrainConfig reward_train;
  PpoRunConfig ppo;
  std::vector<Method> methods;
  PathsConfig paths;
};

/// Defaults for every key; methods covers the full comparison grid.
ExperimentConfig default_config();

/// Parses the flat `section.key = value` format (# comments, blank lines).
/// Unknown keys and malformed values raise ConfigError naming the key.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin);
ExperimentConfig load_config(const std::string& path);

/// Applies the --seed override: replaces every seed in the config.
void override_all_seeds(ExperimentConfig& cfg, std::uint64_t seed);

/// Canonical sorted key=value snapshot (the manifest stores this, and it
/// also round-trips through parse_config_text).
std::map<std::string, std::string> to_flat_map(const ExperimentConfig& cfg);

/// cfg.paths.workdir, or $GELI_WORKDIR when the key is empty; ConfigError
/// if neither is set. The other paths resolve relative to it when empty.
std::string resolved_workdir(const ExperimentConfig& cfg);
std::string resolved_dataset_path(const ExperimentConfig& cfg);
std::string resolved_checkpoint_dir(const ExperimentConfig& cfg);
std::string resolved_report_dir(const ExperimentConfig& cfg);

}  // namespace geli
