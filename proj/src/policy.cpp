#include "geli/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "geli/errors.hpp"

namespace geli {
namespace {

// Log-probabilities for one state, computed in log space so that a wide
// logit gap underflows the probability but never the log.
std::vector<double> log_softmax(const PolicyParams& policy,
                                const std::vector<double>& state) {
  const Matrix& w = policy.w;
  if (state.size() != w.cols)
    throw DataError("policy: state has dimension " +
                    std::to_string(state.size()) + ", expected " +
                    std::to_string(w.cols));
  if (w.rows == 0) throw ConfigError("policy: no actions");

  std::vector<double> logits(w.rows, 0.0);
  for (std::size_t a = 0; a < w.rows; ++a) {
    double z = 0.0;
    for (std::size_t k = 0; k < w.cols; ++k) z += w(a, k) * state[k];
    if (!std::isfinite(z))
      throw NumericError("policy: logit for action " + std::to_string(a) +
                         " is not finite");
    logits[a] = z;
  }

  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  const double lse = zmax + std::log(sum);
  for (double& z : logits) z -= lse;
  return logits;
}

// The policy weight matrix dressed up as a one-layer ParamSet so the shared
// AdamW routine can drive it. The bias slot exists only to satisfy the
// layout; its gradient is always zero.
ParamSet wrap_policy(const PolicyParams& policy) {
  ParamSet p;
  p.weights.push_back(policy.w);
  p.biases.emplace_back(policy.w.rows, 0.0);
  return p;
}

double mean_kl(const PolicyParams& policy, const ReferencePolicy& ref,
               const std::vector<std::vector<double>>& states) {
  double total = 0.0;
  for (const auto& s : states) {
    const auto lp = log_softmax(policy, s);
    const auto lq = log_softmax(ref.params, s);
    double kl = 0.0;
    for (std::size_t a = 0; a < lp.size(); ++a) {
      const double p = std::exp(lp[a]);
      if (p == 0.0) continue;
      if (!std::isfinite(lq[a]))
        throw NumericError(
            "kl_divergence: reference assigns zero probability to an action "
            "the policy uses");
      kl += p * (lp[a] - lq[a]);
    }
    total += kl;
  }
  return total / static_cast<double>(states.size());
}

}  // namespace

PolicyParams make_policy(std::size_t num_actions, std::size_t feature_dim) {
  if (num_actions == 0)
    throw ConfigError("make_policy: need at least one action");
  if (feature_dim == 0)
    throw ConfigError("make_policy: feature_dim must be positive");
  PolicyParams p;
  p.w = Matrix(num_actions, feature_dim);
  return p;
}

std::vector<double> policy_probs(const PolicyParams& policy,
                                 const std::vector<double>& state) {
  auto lp = log_softmax(policy, state);
  for (double& x : lp) x = std::exp(x);
  return lp;
}

std::vector<RolloutStep> rollout(const PolicyParams& policy,
                                 const std::vector<std::vector<double>>& states,
                                 Rng& rng) {
  std::vector<RolloutStep> out;
  out.reserve(states.size());
  for (const auto& s : states) {
    const auto lp = log_softmax(policy, s);
    const double u = rng.uniform();
    double cdf = 0.0;
    std::size_t action = lp.size() - 1;
    for (std::size_t a = 0; a < lp.size(); ++a) {
      cdf += std::exp(lp[a]);
      if (u < cdf) {
        action = a;
        break;
      }
    }
    RolloutStep rec;
    rec.state = s;
    rec.action = action;
    rec.log_prob = lp[action];
    out.push_back(std::move(rec));
  }
  return out;
}

double kl_divergence(const PolicyParams& policy, const ReferencePolicy& ref,
                     const std::vector<std::vector<double>>& states) {
  if (states.empty()) throw DataError("kl_divergence: no states");
  if (policy.w.rows != ref.params.w.rows ||
      policy.w.cols != ref.params.w.cols)
    throw ConfigError("kl_divergence: policy and reference shapes differ");
  return mean_kl(policy, ref, states);
}

PPOStats ppo_update(PolicyParams& policy, const ReferencePolicy& ref,
                    const std::vector<RolloutStep>& batch,
                    const PPOConfig& cfg, AdamWState& opt) {
  if (batch.empty()) throw DataError("ppo_update: empty batch");
  if (!(cfg.clip_range > 0.0))
    throw ConfigError("ppo_update: clip_range must be positive");
  if (cfg.epochs_per_batch == 0)
    throw ConfigError("ppo_update: epochs_per_batch must be positive");
  if (policy.w.rows != ref.params.w.rows ||
      policy.w.cols != ref.params.w.cols)
    throw ConfigError("ppo_update: policy and reference shapes differ");

  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  double reward_mean = 0.0;
  for (const auto& rec : batch) {
    if (!std::isfinite(rec.reward))
      throw NumericError("ppo_update: batch contains a non-finite reward");
    reward_mean += rec.reward;
  }
  reward_mean *= inv_n;

  // Advantages are fixed for the whole batch. Score normalization centers
  // and rescales them; a batch with (numerically) constant rewards carries
  // no preference signal, so its advantages collapse to zero.
  std::vector<double> adv(n);
  if (cfg.use_score_norm) {
    double var = 0.0;
    for (const auto& rec : batch) {
      const double d = rec.reward - reward_mean;
      var += d * d;
    }
    var *= inv_n;
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i)
      adv[i] = sd < 1e-12 ? 0.0 : (batch[i].reward - reward_mean) / sd;
  } else {
    for (std::size_t i = 0; i < n; ++i) adv[i] = batch[i].reward;
  }

  const std::size_t num_actions = policy.w.rows;
  const std::size_t dim = policy.w.cols;
  double clip_fraction = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
    Matrix obj_grad(num_actions, dim);
    std::size_t clipped_count = 0;

    for (std::size_t i = 0; i < n; ++i) {
      const RolloutStep& rec = batch[i];
      if (rec.action >= num_actions)
        throw DataError("ppo_update: rollout action out of range");

      const auto lp = log_softmax(policy, rec.state);
      const auto lq = log_softmax(ref.params, rec.state);
      if (std::exp(lp[rec.action]) == 0.0)
        throw NumericError(
            "ppo_update: sampled action has zero probability under the "
            "current policy");

      const double ratio = std::exp(lp[rec.action] - rec.log_prob);
      if (!std::isfinite(ratio))
        throw NumericError("ppo_update: probability ratio is not finite");
      if (std::abs(ratio - 1.0) > cfg.clip_range) ++clipped_count;

      const double clipped_ratio =
          std::clamp(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
      const double unclipped = ratio * adv[i];
      const double clipped = clipped_ratio * adv[i];

      // d objective / d logits. The surrogate term is live only when the
      // min picks the unclipped branch; on the clipped branch the ratio is
      // pinned at a constant, so only the KL penalty flows.
      std::vector<double> dz(num_actions, 0.0);
      if (unclipped <= clipped) {
        const double coef = adv[i] * ratio;
        for (std::size_t a = 0; a < num_actions; ++a) {
          const double p = std::exp(lp[a]);
          dz[a] += coef * ((a == rec.action ? 1.0 : 0.0) - p);
        }
      }

      double kl = 0.0;
      for (std::size_t a = 0; a < num_actions; ++a) {
        const double p = std::exp(lp[a]);
        if (p > 0.0) kl += p * (lp[a] - lq[a]);
      }
      for (std::size_t a = 0; a < num_actions; ++a) {
        const double p = std::exp(lp[a]);
        if (p > 0.0) dz[a] -= cfg.kl_coeff * p * ((lp[a] - lq[a]) - kl);
      }

      for (std::size_t a = 0; a < num_actions; ++a) {
        if (dz[a] == 0.0) continue;
        const double scaled = dz[a] * inv_n;
        for (std::size_t k = 0; k < dim; ++k)
          obj_grad(a, k) += scaled * rec.state[k];
      }
    }

    clip_fraction = static_cast<double>(clipped_count) * inv_n;

    // AdamW minimizes, the objective is maximized: feed it the negation.
    ParamSet params = wrap_policy(policy);
    ParamSet grads = ParamSet::zeros_like(params);
    for (std::size_t idx = 0; idx < obj_grad.a.size(); ++idx)
      grads.weights[0].a[idx] = -obj_grad.a[idx];
    adamw_step(params, opt, grads);
    policy.w = params.weights[0];
  }

  PPOStats stats;
  stats.mean_reward = reward_mean;
  stats.clip_fraction = clip_fraction;
  std::vector<std::vector<double>> states;
  states.reserve(n);
  for (const auto& rec : batch) states.push_back(rec.state);
  stats.kl = mean_kl(policy, ref, states);
  return stats;
}

PolicyEvalResult evaluate_policy(
    const PolicyParams& policy, const ActionVocab& vocab,
    const std::vector<std::vector<std::vector<double>>>& episodes,
    std::uint64_t seed) {
  if (episodes.empty()) throw DataError("evaluate_policy: no episodes");
  if (vocab.size() != policy.num_actions())
    throw ConfigError("evaluate_policy: vocabulary size " +
                      std::to_string(vocab.size()) + " does not match the " +
                      std::to_string(policy.num_actions()) + "-action policy");

  std::vector<double> returns;
  returns.reserve(episodes.size());
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    Rng rng(Rng::derive(seed, "policy_eval", e));
    const auto recs = rollout(policy, episodes[e], rng);
    double ret = 0.0;
    for (const auto& rec : recs) ret += vocab.true_g[rec.action];
    returns.push_back(ret);
  }

  PolicyEvalResult out;
  for (double r : returns) out.mean_return += r;
  out.mean_return /= static_cast<double>(returns.size());
  if (returns.size() > 1) {
    double var = 0.0;
    for (double r : returns) {
      const double d = r - out.mean_return;
      var += d * d;
    }
    var /= static_cast<double>(returns.size() - 1);
    out.std_error = std::sqrt(var / static_cast<double>(returns.size()));
  }
  return out;
}

AdaptResult run_ppo_adaptation(const RewardNet& reward, const ActionVocab& vocab,
                               const std::vector<std::vector<double>>& state_pool,
                               const PPOConfig& cfg, std::size_t iterations) {
  if (state_pool.empty()) throw DataError("run_ppo_adaptation: empty state pool");
  if (cfg.batch_size == 0)
    throw ConfigError("run_ppo_adaptation: batch_size must be positive");
  if (vocab.size() == 0)
    throw ConfigError("run_ppo_adaptation: empty action vocabulary");

  const std::size_t dim = state_pool[0].size();
  for (const auto& s : state_pool)
    if (s.size() != dim)
      throw DataError("run_ppo_adaptation: ragged state pool");
  for (const auto& f : vocab.features)
    if (f.size() != dim)
      throw ConfigError(
          "run_ppo_adaptation: vocabulary feature dimension does not match "
          "the state pool");

  AdaptResult out;
  out.policy = make_policy(vocab.size(), dim);
  out.reference.params = out.policy;

  AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  out.opt = make_adamw(wrap_policy(out.policy), opt_cfg);

  out.curve.reserve(iterations);
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    Rng batch_rng(Rng::derive(cfg.seed, "ppo_batch", iter));
    std::vector<std::vector<double>> states;
    states.reserve(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b)
      states.push_back(state_pool[batch_rng.uniform_index(state_pool.size())]);

    Rng rollout_rng(Rng::derive(cfg.seed, "ppo_rollout", iter));
    auto batch = rollout(out.policy, states, rollout_rng);

    double true_mean = 0.0;
    for (auto& rec : batch) {
      Step turn;
      turn.state_features = rec.state;
      turn.action_features = vocab.features[rec.action];
      rec.reward = reward_forward(reward, turn);
      true_mean += vocab.true_g[rec.action];
    }
    true_mean /= static_cast<double>(batch.size());

    const PPOStats stats =
        ppo_update(out.policy, out.reference, batch, cfg, out.opt);

    AdaptLogEntry entry;
    entry.iteration = iter + 1;
    entry.mean_shaped_reward = stats.mean_reward;
    entry.mean_true_reward = true_mean;
    entry.kl = stats.kl;
    entry.clip_fraction = stats.clip_fraction;
    out.curve.push_back(entry);
  }
  return out;
}

}  // namespace geli
