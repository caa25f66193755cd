#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geli/reward_net.hpp"
#include "geli/traj.hpp"

namespace geli {

/// Synthetic conversation benchmark. Each turn draws a latent quality q_t
/// from the mixture 0.8*N(0,1) + 0.2*N(2,1); the hidden per-turn reward is
/// g_t = reward_scale * q_t. Action features encode q_t plus noise, state
/// features encode the running history quality plus noise, so g_t is
/// learnable from features but not noiselessly. A turn's binary proxy label
/// is 1 with probability proxy_accuracy_p when g_t lies above the dataset
/// median of g and with probability 1 - p otherwise. The session return is
/// sum_t g_t plus N(0, return_noise_sigma^2) noise.
struct EnvConfig {
  std::size_t horizon_t = 20;
  std::size_t feature_dim = 16;
  std::size_t num_trajectories = 625;
  double proxy_accuracy_p = 0.9;
  double return_noise_sigma = 0.0;
  std::uint64_t seed = 42;
  double reward_scale = 0.02;
};

/// Hidden per-step rewards, aligned with a dataset trajectory-by-trajectory.
struct GroundTruth {
  std::vector<std::vector<double>> g;
};

struct SynthData {
  Dataset dataset;
  GroundTruth truth;
};

/// Generates a dataset plus its hidden ground truth. Bit-identical output
/// for a given config on every platform: all sampling runs through the
/// project Rng with streams derived per (purpose, trajectory, step).
SynthData generate(const EnvConfig& cfg);

/// Ground-truth sidecar: one {"g": [...]} line per dataset line.
void save_ground_truth(const GroundTruth& truth, const std::string& path);
GroundTruth load_ground_truth(const std::string& path);

struct LabeledSplits {
  std::array<Dataset, 3> datasets;
  std::array<GroundTruth, 3> truths;
};

/// split_dataset plus the matching partition of the ground truth.
LabeledSplits split_with_truth(const Dataset& dataset, const GroundTruth& truth,
                               const std::array<double, 3>& fractions,
                               std::uint64_t seed);

struct OracleReport {
  double pearson_r = 0.0;
  double aligned_mse = 0.0;
  double sign_agreement = 0.0;
  bool degenerate = false;
};

/// Compares predicted per-step rewards against the hidden g_t:
///  - Pearson correlation over all steps,
///  - MSE after the best per-dataset affine map a*r+b (a decomposition is
///    only identified up to affine slack by the sum constraint),
///  - fraction of steps where prediction and truth fall on the same side of
///    their respective medians.
/// A constant prediction vector sets the degenerate flag and reports
/// correlation 0 with the best-constant MSE.
OracleReport oracle_eval(const std::vector<std::vector<double>>& rewards,
                         const GroundTruth& truth);

/// Same, with rewards computed by a net over the dataset.
OracleReport oracle_eval(const RewardNet& net, const Dataset& dataset,
                         const GroundTruth& truth);

/// A fixed menu of actions for policy adaptation. Each action has a latent
/// quality drawn from the same mixture as dataset turns, features produced
/// by the same encoder (so a reward net trained on the dataset scores it),
/// and a hidden true per-step reward g = reward_scale * q.
struct ActionVocab {
  std::vector<std::vector<double>> features;
  std::vector<double> true_g;

  std::size_t size() const { return true_g.size(); }
};

ActionVocab make_action_vocab(const EnvConfig& cfg, std::size_t num_actions);

/// Held-out evaluation episodes: state sequences drawn from the same state
/// distribution as generate(), on a stream independent of the dataset.
std::vector<std::vector<std::vector<double>>> make_eval_episodes(
    const EnvConfig& cfg, std::size_t episodes);

}  // namespace geli
