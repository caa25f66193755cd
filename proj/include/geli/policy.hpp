#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "geli/reward_net.hpp"
#include "geli/rng.hpp"
#include "geli/synth.hpp"

namespace geli {

/// Linear softmax policy over a fixed action vocabulary:
/// pi(a | s) = softmax(W s)_a with W of shape actions x feature_dim.
/// No bias term; a zero W is the uniform policy.
struct PolicyParams {
  Matrix w;

  std::size_t num_actions() const { return w.rows; }
  std::size_t feature_dim() const { return w.cols; }
};

PolicyParams make_policy(std::size_t num_actions, std::size_t feature_dim);

/// The frozen anchor the adapted policy is penalized against.
struct ReferencePolicy {
  PolicyParams params;
};

/// Action probabilities for one state (stable softmax). Throws NumericError
/// if a logit is non-finite.
std::vector<double> policy_probs(const PolicyParams& policy,
                                 const std::vector<double>& state);

struct PPOConfig {
  double clip_range = 0.2;
  double kl_coeff = 0.05;
  double lr = 1.4e-5;
  std::size_t batch_size = 24;
  bool use_score_norm = true;
  std::size_t epochs_per_batch = 4;
  std::uint64_t seed = 0;
};

/// One sampled turn: the state it was sampled in, the chosen action, the
/// log-probability under the sampling policy, and the reward filled in by
/// whoever scores the turn.
struct RolloutStep {
  std::vector<double> state;
  std::size_t action = 0;
  double log_prob = 0.0;
  double reward = 0.0;
};

/// Samples one action per state from the policy.
std::vector<RolloutStep> rollout(const PolicyParams& policy,
                                 const std::vector<std::vector<double>>& states,
                                 Rng& rng);

/// Mean over states of KL(pi(.|s) || ref(.|s)), computed exactly from the
/// two softmax distributions. A state where the reference assigns zero
/// probability to an action the policy uses raises NumericError.
double kl_divergence(const PolicyParams& policy, const ReferencePolicy& ref,
                     const std::vector<std::vector<double>>& states);

struct PPOStats {
  double mean_reward = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
};

/// Several ascent steps on one batch of rollout records. The objective is
/// the clipped surrogate minus kl_coeff times the reference KL; advantages
/// are the record rewards, score-normalized across the batch when
/// cfg.use_score_norm is set. Gradients are exact (no sampling inside the
/// update) and applied with AdamW through `opt`.
PPOStats ppo_update(PolicyParams& policy, const ReferencePolicy& ref,
                    const std::vector<RolloutStep>& batch,
                    const PPOConfig& cfg, AdamWState& opt);

struct PolicyEvalResult {
  double mean_return = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of the true episode return under the policy: for
/// each episode, sample one action per state and sum the vocabulary's
/// hidden per-step rewards.
PolicyEvalResult evaluate_policy(
    const PolicyParams& policy, const ActionVocab& vocab,
    const std::vector<std::vector<std::vector<double>>>& episodes,
    std::uint64_t seed);

/// One adaptation iteration's log line.
struct AdaptLogEntry {
  std::size_t iteration = 0;
  double mean_shaped_reward = 0.0;
  double mean_true_reward = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
};

struct AdaptResult {
  PolicyParams policy;
  ReferencePolicy reference;
  AdamWState opt;
  std::vector<AdaptLogEntry> curve;
};

/// Full adaptation loop: starting from the uniform policy (which is also
/// the frozen reference), repeatedly samples a batch of states from
/// `state_pool`, rolls out one action each, scores the turns with the
/// reward net, and applies ppo_update.
AdaptResult run_ppo_adaptation(const RewardNet& reward, const ActionVocab& vocab,
                               const std::vector<std::vector<double>>& state_pool,
                               const PPOConfig& cfg, std::size_t iterations);

}  // namespace geli
