#include "geli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "geli/errors.hpp"

namespace geli {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(trim(part));
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key +
                      "': expected a non-negative integer, got '" + value +
                      "'");
  }
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" +
                    value + "'");
}

std::string fmt(double x) { return nlohmann::json(x).dump(); }
std::string fmt(std::uint64_t x) { return std::to_string(x); }
std::string fmt(bool x) { return x ? "true" : "false"; }

void apply_key(ExperimentConfig& cfg, const std::string& key,
               const std::string& value) {
  if (key == "env.horizon_t") cfg.env.horizon_t = parse_size(key, value);
  else if (key == "env.feature_dim") cfg.env.feature_dim = parse_size(key, value);
  else if (key == "env.num_trajectories")
    cfg.env.num_trajectories = parse_size(key, value);
  else if (key == "env.proxy_accuracy_p")
    cfg.env.proxy_accuracy_p = parse_double(key, value);
  else if (key == "env.return_noise_sigma")
    cfg.env.return_noise_sigma = parse_double(key, value);
  else if (key == "env.seed") cfg.env.seed = parse_u64(key, value);
  else if (key == "env.reward_scale")
    cfg.env.reward_scale = parse_double(key, value);
  else if (key == "split.fractions") {
    const auto parts = split_commas(value);
    if (parts.size() != 3)
      throw ConfigError("config key 'split.fractions': expected three "
                        "comma-separated numbers, got '" + value + "'");
    for (std::size_t i = 0; i < 3; ++i)
      cfg.split_fractions[i] = parse_double(key, parts[i]);
  } else if (key == "split.seed") cfg.split_seed = parse_u64(key, value);
  else if (key == "geli.lambda") cfg.geli.lambda = parse_double(key, value);
  else if (key == "geli.rrd_k") {
    const std::size_t k = parse_size(key, value);
    if (k == 0) cfg.geli.rrd_k.reset();
    else cfg.geli.rrd_k = k;
  } else if (key == "geli.rng_seed") cfg.geli.rng_seed = parse_u64(key, value);
  else if (key == "reward_train.lr")
    cfg.reward_train.lr = parse_double(key, value);
  else if (key == "reward_train.batch_size") {
    const std::size_t b = parse_size(key, value);
    if (b == 0) cfg.reward_train.batch_size.reset();
    else cfg.reward_train.batch_size = b;
  } else if (key == "reward_train.epochs")
    cfg.reward_train.epochs = parse_size(key, value);
  else if (key == "reward_train.eval_every")
    cfg.reward_train.eval_every = parse_size(key, value);
  else if (key == "reward_train.hidden_width")
    cfg.reward_train.hidden_width = parse_size(key, value);
  else if (key == "reward_train.hidden_layers")
    cfg.reward_train.hidden_layers = parse_size(key, value);
  else if (key == "reward_train.activation") {
    if (value == "tanh") cfg.reward_train.activation = Activation::kTanh;
    else if (value == "relu") cfg.reward_train.activation = Activation::kRelu;
    else
      throw ConfigError(
          "config key 'reward_train.activation': expected tanh or relu, "
          "got '" + value + "'");
  } else if (key == "reward_train.weight_decay")
    cfg.reward_train.weight_decay = parse_double(key, value);
  else if (key == "reward_train.ircr_norm") {
    if (value == "minmax") cfg.reward_train.ircr_norm = IrcrNorm::kMinMax;
    else if (value == "zscore") cfg.reward_train.ircr_norm = IrcrNorm::kZScore;
    else
      throw ConfigError(
          "config key 'reward_train.ircr_norm': expected minmax or zscore, "
          "got '" + value + "'");
  } else if (key == "ppo.clip_range")
    cfg.ppo.ppo.clip_range = parse_double(key, value);
  else if (key == "ppo.kl_coeff") cfg.ppo.ppo.kl_coeff = parse_double(key, value);
  else if (key == "ppo.lr") cfg.ppo.ppo.lr = parse_double(key, value);
  else if (key == "ppo.batch_size")
    cfg.ppo.ppo.batch_size = parse_size(key, value);
  else if (key == "ppo.use_score_norm")
    cfg.ppo.ppo.use_score_norm = parse_bool(key, value);
  else if (key == "ppo.epochs_per_batch")
    cfg.ppo.ppo.epochs_per_batch = parse_size(key, value);
  else if (key == "ppo.seed") cfg.ppo.ppo.seed = parse_u64(key, value);
  else if (key == "ppo.iterations") cfg.ppo.iterations = parse_size(key, value);
  else if (key == "ppo.num_actions")
    cfg.ppo.num_actions = parse_size(key, value);
  else if (key == "ppo.eval_episodes")
    cfg.ppo.eval_episodes = parse_size(key, value);
  else if (key == "methods") {
    const auto parts = split_commas(value);
    if (parts.empty())
      throw ConfigError("config key 'methods': expected at least one method");
    cfg.methods.clear();
    for (const auto& p : parts) cfg.methods.push_back(parse_method(p));
  } else if (key == "paths.workdir") cfg.paths.workdir = value;
  else if (key == "paths.dataset") cfg.paths.dataset = value;
  else if (key == "paths.checkpoints") cfg.paths.checkpoints = value;
  else if (key == "paths.reports") cfg.paths.reports = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll = {
      Method::kGeRrd, Method::kGeIrcr, Method::kGeRudder, Method::kLiOnly,
      Method::kGeliRrdVa};
  return kAll;
}

std::string method_name(Method method) {
  switch (method) {
    case Method::kGeRrd: return "GE_RRD";
    case Method::kGeIrcr: return "GE_IRCR";
    case Method::kGeRudder: return "GE_RUDDER";
    case Method::kLiOnly: return "LI_ONLY";
    case Method::kGeliRrdVa: return "GELI_RRD_VA";
  }
  throw ConfigError("method_name: bad method enum value");
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods())
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method '" + name +
                    "' (expected one of GE_RRD, GE_IRCR, GE_RUDDER, LI_ONLY, "
                    "GELI_RRD_VA)");
}

bool method_uses_labels(Method method) {
  return method == Method::kLiOnly || method == Method::kGeliRrdVa;
}

std::size_t resolve_batch_size(const RewardTrainConfig& cfg, Method method) {
  if (cfg.batch_size) return *cfg.batch_size;
  return method_uses_labels(method) ? 32 : 1;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.geli.rrd_k = 16;
  cfg.methods = all_methods();
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
  ExperimentConfig cfg = default_config();
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": empty key");
    apply_key(cfg, key, value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void override_all_seeds(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.env.seed = seed;
  cfg.split_seed = seed;
  cfg.geli.rng_seed = seed;
  cfg.ppo.ppo.seed = seed;
}

std::map<std::string, std::string> to_flat_map(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> m;
  m["env.horizon_t"] = fmt(cfg.env.horizon_t);
  m["env.feature_dim"] = fmt(cfg.env.feature_dim);
  m["env.num_trajectories"] = fmt(cfg.env.num_trajectories);
  m["env.proxy_accuracy_p"] = fmt(cfg.env.proxy_accuracy_p);
  m["env.return_noise_sigma"] = fmt(cfg.env.return_noise_sigma);
  m["env.seed"] = fmt(cfg.env.seed);
  m["env.reward_scale"] = fmt(cfg.env.reward_scale);
  m["split.fractions"] = fmt(cfg.split_fractions[0]) + "," +
                         fmt(cfg.split_fractions[1]) + "," +
                         fmt(cfg.split_fractions[2]);
  m["split.seed"] = fmt(cfg.split_seed);
  m["geli.lambda"] = fmt(cfg.geli.lambda);
  m["geli.rrd_k"] = fmt(cfg.geli.rrd_k ? *cfg.geli.rrd_k : std::size_t{0});
  m["geli.rng_seed"] = fmt(cfg.geli.rng_seed);
  m["reward_train.lr"] = fmt(cfg.reward_train.lr);
  m["reward_train.batch_size"] =
      fmt(cfg.reward_train.batch_size ? *cfg.reward_train.batch_size
                                      : std::size_t{0});
  m["reward_train.epochs"] = fmt(cfg.reward_train.epochs);
  m["reward_train.eval_every"] = fmt(cfg.reward_train.eval_every);
  m["reward_train.hidden_width"] = fmt(cfg.reward_train.hidden_width);
  m["reward_train.hidden_layers"] = fmt(cfg.reward_train.hidden_layers);
  m["reward_train.activation"] =
      cfg.reward_train.activation == Activation::kTanh ? "tanh" : "relu";
  m["reward_train.weight_decay"] = fmt(cfg.reward_train.weight_decay);
  m["reward_train.ircr_norm"] =
      cfg.reward_train.ircr_norm == IrcrNorm::kMinMax ? "minmax" : "zscore";
  m["ppo.clip_range"] = fmt(cfg.ppo.ppo.clip_range);
  m["ppo.kl_coeff"] = fmt(cfg.ppo.ppo.kl_coeff);
  m["ppo.lr"] = fmt(cfg.ppo.ppo.lr);
  m["ppo.batch_size"] = fmt(cfg.ppo.ppo.batch_size);
  m["ppo.use_score_norm"] = fmt(cfg.ppo.ppo.use_score_norm);
  m["ppo.epochs_per_batch"] = fmt(cfg.ppo.ppo.epochs_per_batch);
  m["ppo.seed"] = fmt(cfg.ppo.ppo.seed);
  m["ppo.iterations"] = fmt(cfg.ppo.iterations);
  m["ppo.num_actions"] = fmt(cfg.ppo.num_actions);
  m["ppo.eval_episodes"] = fmt(cfg.ppo.eval_episodes);
  std::string methods;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    if (i) methods += ",";
    methods += method_name(cfg.methods[i]);
  }
  m["methods"] = methods;
  m["paths.workdir"] = cfg.paths.workdir;
  m["paths.dataset"] = cfg.paths.dataset;
  m["paths.checkpoints"] = cfg.paths.checkpoints;
  m["paths.reports"] = cfg.paths.reports;
  return m;
}

std::string resolved_workdir(const ExperimentConfig& cfg) {
  if (!cfg.paths.workdir.empty()) return cfg.paths.workdir;
  const char* env = std::getenv("GELI_WORKDIR");
  if (env != nullptr && *env != '\0') return env;
  throw ConfigError(
      "no workdir: set paths.workdir in the config or the GELI_WORKDIR "
      "environment variable");
}

std::string resolved_dataset_path(const ExperimentConfig& cfg) {
  if (!cfg.paths.dataset.empty()) return cfg.paths.dataset;
  return resolved_workdir(cfg) + "/dataset.jsonl";
}

std::string resolved_checkpoint_dir(const ExperimentConfig& cfg) {
  if (!cfg.paths.checkpoints.empty()) return cfg.paths.checkpoints;
  return resolved_workdir(cfg) + "/checkpoints";
}

std::string resolved_report_dir(const ExperimentConfig& cfg) {
  if (!cfg.paths.reports.empty()) return cfg.paths.reports;
  return resolved_workdir(cfg) + "/reports";
}

}  // namespace geli
