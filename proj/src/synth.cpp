#include "geli/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "geli/errors.hpp"
#include "geli/rng.hpp"

namespace geli {
namespace {

using nlohmann::json;

// Feature construction constants. Action features carry the turn's latent
// quality along a fixed random direction with additive noise; state features
// carry the mean latent quality of the turns so far (the history prefix)
// along a second direction. The noise scales bound how well g_t can be read
// back off the features.
constexpr double kActionNoise = 0.5;
constexpr double kStateNoise = 0.25;

std::vector<double> unit_direction(std::size_t dim, std::uint64_t stream) {
  Rng rng(stream);
  std::vector<double> d(dim);
  double norm_sq = 0.0;
  for (double& x : d) {
    x = rng.normal();
    norm_sq += x * x;
  }
  const double norm = std::sqrt(norm_sq);
  for (double& x : d) x /= norm;
  return d;
}

double latent_quality(Rng& rng) {
  const double mu = rng.uniform() < 0.8 ? 0.0 : 2.0;
  return mu + rng.normal();
}

}  // namespace

SynthData generate(const EnvConfig& cfg) {
  if (cfg.horizon_t == 0) throw ConfigError("generate: horizon_t must be positive");
  if (cfg.feature_dim == 0) throw ConfigError("generate: feature_dim must be positive");
  if (cfg.num_trajectories == 0)
    throw ConfigError("generate: num_trajectories must be positive");
  if (!(cfg.proxy_accuracy_p >= 0.0 && cfg.proxy_accuracy_p <= 1.0))
    throw ConfigError("generate: proxy_accuracy_p must lie in [0, 1]");
  if (!(cfg.return_noise_sigma >= 0.0))
    throw ConfigError("generate: return_noise_sigma must be >= 0");
  if (!(cfg.reward_scale > 0.0))
    throw ConfigError("generate: reward_scale must be positive");

  const auto action_dir = unit_direction(cfg.feature_dim,
                                         Rng::derive(cfg.seed, "action_dir"));
  const auto state_dir = unit_direction(cfg.feature_dim,
                                        Rng::derive(cfg.seed, "state_dir"));

  SynthData out;
  out.dataset.trajectories.resize(cfg.num_trajectories);
  out.truth.g.resize(cfg.num_trajectories);

  // First pass: latent qualities, features and returns. Labels need the
  // dataset-wide median of g, so they are drawn in a second pass.
  std::vector<double> all_g;
  all_g.reserve(cfg.num_trajectories * cfg.horizon_t);
  for (std::size_t i = 0; i < cfg.num_trajectories; ++i) {
    Trajectory& traj = out.dataset.trajectories[i];
    traj.steps.resize(cfg.horizon_t);
    auto& g_row = out.truth.g[i];
    g_row.resize(cfg.horizon_t);

    double q_prefix_sum = 0.0;
    double g_sum = 0.0;
    for (std::size_t t = 0; t < cfg.horizon_t; ++t) {
      Rng q_rng(Rng::derive(cfg.seed, "q", i, t));
      const double q = latent_quality(q_rng);
      const double g = cfg.reward_scale * q;
      g_row[t] = g;
      g_sum += g;
      all_g.push_back(g);

      Step& step = traj.steps[t];
      step.action_features.resize(cfg.feature_dim);
      Rng a_rng(Rng::derive(cfg.seed, "afeat", i, t));
      for (std::size_t j = 0; j < cfg.feature_dim; ++j)
        step.action_features[j] = q * action_dir[j] + kActionNoise * a_rng.normal();

      const double prefix_mean =
          q_prefix_sum / static_cast<double>(cfg.horizon_t);
      step.state_features.resize(cfg.feature_dim);
      Rng s_rng(Rng::derive(cfg.seed, "sfeat", i, t));
      for (std::size_t j = 0; j < cfg.feature_dim; ++j)
        step.state_features[j] =
            prefix_mean * state_dir[j] + kStateNoise * s_rng.normal();
      q_prefix_sum += q;
    }

    traj.global_return = g_sum;
    if (cfg.return_noise_sigma > 0.0) {
      Rng r_rng(Rng::derive(cfg.seed, "ret", i));
      traj.global_return += cfg.return_noise_sigma * r_rng.normal();
    }
  }

  std::vector<double> sorted_g = all_g;
  std::sort(sorted_g.begin(), sorted_g.end());
  const std::size_t n = sorted_g.size();
  const double median = n % 2 == 1
                            ? sorted_g[n / 2]
                            : 0.5 * (sorted_g[n / 2 - 1] + sorted_g[n / 2]);

  for (std::size_t i = 0; i < cfg.num_trajectories; ++i) {
    for (std::size_t t = 0; t < cfg.horizon_t; ++t) {
      Rng l_rng(Rng::derive(cfg.seed, "label", i, t));
      const bool above = out.truth.g[i][t] > median;
      const double p_one = above ? cfg.proxy_accuracy_p : 1.0 - cfg.proxy_accuracy_p;
      out.dataset.trajectories[i].steps[t].mm_label =
          l_rng.uniform() < p_one ? 1 : 0;
    }
  }
  return out;
}

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write ground truth: " + path);
  for (const auto& row : truth.g) {
    json rec;
    rec["g"] = row;
    out << rec.dump() << '\n';
  }
  if (!out) throw ArtifactError("write failed: " + path);
}

GroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open ground truth: " + path);
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("g") || !rec["g"].is_array())
      throw DataError(path + ":" + std::to_string(line_no) + ": missing \"g\" array");
    truth.g.push_back(rec["g"].get<std::vector<double>>());
  }
  if (truth.g.empty()) throw DataError(path + ": no ground truth rows");
  return truth;
}

LabeledSplits split_with_truth(const Dataset& dataset, const GroundTruth& truth,
                               const std::array<double, 3>& fractions,
                               std::uint64_t seed) {
  if (truth.g.size() != dataset.size())
    throw DataError("split_with_truth: truth rows do not match dataset size");
  const auto parts = split_indices(dataset.size(), fractions, seed);

  LabeledSplits out;
  out.datasets[0].split_tag = SplitTag::kRewardTrain;
  out.datasets[1].split_tag = SplitTag::kRewardTest;
  out.datasets[2].split_tag = SplitTag::kPolicyTrain;
  for (std::size_t part = 0; part < 3; ++part) {
    for (std::size_t idx : parts[part]) {
      out.datasets[part].trajectories.push_back(dataset.trajectories[idx]);
      out.truths[part].g.push_back(truth.g[idx]);
    }
  }
  return out;
}

namespace {

void flatten(const std::vector<std::vector<double>>& rows,
             std::vector<double>& out) {
  for (const auto& row : rows) out.insert(out.end(), row.begin(), row.end());
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

OracleReport oracle_eval(const std::vector<std::vector<double>>& rewards,
                         const GroundTruth& truth) {
  if (rewards.size() != truth.g.size())
    throw DataError("oracle_eval: rewards do not match truth trajectory count");
  std::vector<double> r, g;
  flatten(rewards, r);
  flatten(truth.g, g);
  if (r.size() != g.size())
    throw DataError("oracle_eval: rewards do not match truth step counts");
  if (r.size() < 2) throw DataError("oracle_eval: need at least two steps");

  const auto n = static_cast<double>(r.size());
  double mr = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    mr += r[i];
    mg += g[i];
  }
  mr /= n;
  mg /= n;
  double var_r = 0.0, var_g = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double dr = r[i] - mr;
    const double dg = g[i] - mg;
    var_r += dr * dr;
    var_g += dg * dg;
    cov += dr * dg;
  }
  var_r /= n;
  var_g /= n;
  cov /= n;

  OracleReport report;
  report.degenerate = var_r < 1e-24;
  const double slope = report.degenerate ? 0.0 : cov / var_r;
  const double intercept = mg - slope * mr;
  double mse = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = slope * r[i] + intercept - g[i];
    mse += d * d;
  }
  report.aligned_mse = mse / n;
  report.pearson_r = report.degenerate || var_g < 1e-24
                         ? 0.0
                         : cov / std::sqrt(var_r * var_g);

  const double med_r = median_of(r);
  const double med_g = median_of(g);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if ((r[i] > med_r) == (g[i] > med_g)) ++agree;
  report.sign_agreement = static_cast<double>(agree) / n;
  return report;
}

OracleReport oracle_eval(const RewardNet& net, const Dataset& dataset,
                         const GroundTruth& truth) {
  return oracle_eval(per_step_rewards(net, dataset), truth);
}

ActionVocab make_action_vocab(const EnvConfig& cfg, std::size_t num_actions) {
  if (num_actions == 0)
    throw ConfigError("make_action_vocab: need at least one action");
  if (cfg.feature_dim == 0)
    throw ConfigError("make_action_vocab: feature_dim must be positive");
  if (!(cfg.reward_scale > 0.0))
    throw ConfigError("make_action_vocab: reward_scale must be positive");

  // Same direction the dataset's action features use, so a reward net
  // trained on the dataset reads vocabulary actions the same way.
  const auto action_dir = unit_direction(cfg.feature_dim,
                                         Rng::derive(cfg.seed, "action_dir"));

  ActionVocab vocab;
  vocab.features.resize(num_actions);
  vocab.true_g.resize(num_actions);
  for (std::size_t a = 0; a < num_actions; ++a) {
    Rng rng(Rng::derive(cfg.seed, "vocab", a));
    const double q = latent_quality(rng);
    auto& feat = vocab.features[a];
    feat.resize(cfg.feature_dim);
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
      feat[j] = q * action_dir[j] + kActionNoise * rng.normal();
    vocab.true_g[a] = cfg.reward_scale * q;
  }
  return vocab;
}

std::vector<std::vector<std::vector<double>>> make_eval_episodes(
    const EnvConfig& cfg, std::size_t episodes) {
  if (episodes == 0)
    throw ConfigError("make_eval_episodes: need at least one episode");
  if (cfg.horizon_t == 0)
    throw ConfigError("make_eval_episodes: horizon_t must be positive");
  if (cfg.feature_dim == 0)
    throw ConfigError("make_eval_episodes: feature_dim must be positive");

  const auto state_dir = unit_direction(cfg.feature_dim,
                                        Rng::derive(cfg.seed, "state_dir"));

  std::vector<std::vector<std::vector<double>>> out(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto& episode = out[e];
    episode.resize(cfg.horizon_t);
    double q_prefix_sum = 0.0;
    for (std::size_t t = 0; t < cfg.horizon_t; ++t) {
      Rng q_rng(Rng::derive(cfg.seed, "eval_q", e, t));
      const double q = latent_quality(q_rng);
      const double prefix_mean =
          q_prefix_sum / static_cast<double>(cfg.horizon_t);
      auto& state = episode[t];
      state.resize(cfg.feature_dim);
      Rng s_rng(Rng::derive(cfg.seed, "eval_sfeat", e, t));
      for (std::size_t j = 0; j < cfg.feature_dim; ++j)
        state[j] = prefix_mean * state_dir[j] + kStateNoise * s_rng.normal();
      q_prefix_sum += q;
    }
  }
  return out;
}

}  // namespace geli
