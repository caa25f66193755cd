#include "geli/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "geli/errors.hpp"

namespace geli {
namespace {

void check_batch_shapes(const std::vector<std::vector<double>>& rewards,
                        const std::vector<double>& returns) {
  if (rewards.empty()) throw DataError("loss: empty batch");
  if (rewards.size() != returns.size())
    throw DataError("loss: rewards and returns disagree on batch size");
  for (const auto& r : rewards)
    if (r.empty()) throw DataError("loss: trajectory with no steps");
}

}  // namespace

double loss_ge(const std::vector<std::vector<double>>& rewards_per_step,
               const std::vector<double>& returns) {
  check_batch_shapes(rewards_per_step, returns);
  double acc = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    double sum = 0.0;
    for (double r : rewards_per_step[i]) sum += r;
    const double resid = returns[i] - sum;
    acc += resid * resid;
  }
  return acc / static_cast<double>(returns.size());
}

IndexSubset sample_index_subset(std::size_t horizon, std::size_t k, Rng& rng) {
  if (k == 0 || k > horizon)
    throw ConfigError("sample_index_subset: need 0 < K <= horizon, got K=" +
                      std::to_string(k) + ", horizon=" + std::to_string(horizon));
  // Partial Fisher-Yates over [0, horizon): the first K slots of the shuffle
  // are a uniform K-subset.
  std::vector<std::size_t> pool(horizon);
  for (std::size_t i = 0; i < horizon; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i)
    std::swap(pool[i], pool[i + rng.uniform_index(horizon - i)]);
  IndexSubset subset;
  subset.indices.assign(pool.begin(), pool.begin() + static_cast<long>(k));
  std::sort(subset.indices.begin(), subset.indices.end());
  return subset;
}

double loss_rrd_with_subsets(
    const std::vector<std::vector<double>>& rewards_per_step,
    const std::vector<double>& returns,
    const std::vector<IndexSubset>& subsets) {
  check_batch_shapes(rewards_per_step, returns);
  if (subsets.size() != returns.size())
    throw DataError("loss_rrd: one subset per trajectory required");

  double acc = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    const auto& rewards = rewards_per_step[i];
    const auto& idx = subsets[i].indices;
    if (idx.empty() || idx.size() > rewards.size())
      throw DataError("loss_rrd: subset size out of range");
    const double scale =
        static_cast<double>(rewards.size()) / static_cast<double>(idx.size());
    double sum = 0.0;
    for (std::size_t t : idx) {
      if (t >= rewards.size()) throw DataError("loss_rrd: subset index out of range");
      sum += rewards[t];
    }
    const double resid = returns[i] - scale * sum;
    acc += resid * resid;
  }
  return acc / static_cast<double>(returns.size());
}

double loss_rrd(const std::vector<std::vector<double>>& rewards_per_step,
                const std::vector<double>& returns, std::size_t k,
                std::uint64_t seed) {
  check_batch_shapes(rewards_per_step, returns);
  std::vector<IndexSubset> subsets;
  subsets.reserve(returns.size());
  for (std::size_t i = 0; i < returns.size(); ++i) {
    Rng stream(Rng::derive(seed, "rrd_subset", i));
    subsets.push_back(
        sample_index_subset(rewards_per_step[i].size(), k, stream));
  }
  return loss_rrd_with_subsets(rewards_per_step, returns, subsets);
}

double gamma_score(const std::optional<int>& mm_label) {
  if (!mm_label) throw DataError("gamma_score: step has no proxy label");
  if (*mm_label != 0 && *mm_label != 1)
    throw DataError("gamma_score: label must be 0 or 1");
  return *mm_label == 1 ? 1.0 : 0.0;
}

double loss_li(const std::vector<double>& rewards_per_labeled_step,
               const std::vector<int>& labels) {
  if (rewards_per_labeled_step.empty())
    throw DataError("loss_li: no labeled steps in batch");
  if (rewards_per_labeled_step.size() != labels.size())
    throw DataError("loss_li: rewards and labels disagree on size");
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double gamma = gamma_score(labels[i]);
    const double d = gamma - rewards_per_labeled_step[i];
    acc += d * d;
  }
  return acc / static_cast<double>(labels.size());
}

double loss_geli(double ge_part, double li_part, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("loss_geli: lambda must lie in [0, 1]");
  return lambda * ge_part + (1.0 - lambda) * li_part;
}

std::vector<std::vector<double>> ircr_proxy(const Dataset& dataset,
                                            IrcrNorm norm) {
  if (dataset.trajectories.empty()) throw DataError("ircr_proxy: empty dataset");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double mean = 0.0;
  for (const auto& t : dataset.trajectories) {
    lo = std::min(lo, t.global_return);
    hi = std::max(hi, t.global_return);
    mean += t.global_return;
  }
  mean /= static_cast<double>(dataset.size());

  if (hi - lo < 1e-12)
    throw DataError(
        "ircr_proxy: all trajectory returns are equal; normalization is "
        "undefined, use the mean baseline instead");

  double sq = 0.0;
  for (const auto& t : dataset.trajectories) {
    const double d = t.global_return - mean;
    sq += d * d;
  }
  const double sd = std::sqrt(sq / static_cast<double>(dataset.size()));

  std::vector<std::vector<double>> proxies;
  proxies.reserve(dataset.size());
  for (const auto& t : dataset.trajectories) {
    const double value = norm == IrcrNorm::kMinMax
                             ? (t.global_return - lo) / (hi - lo)
                             : (t.global_return - mean) / sd;
    proxies.emplace_back(t.steps.size(), value);
  }
  return proxies;
}

std::vector<double> rudder_credit(const std::vector<double>& prefix_predictions) {
  if (prefix_predictions.size() < 2)
    throw DataError("rudder_credit: need predictions for at least two prefixes");
  std::vector<double> credit(prefix_predictions.size() - 1);
  for (std::size_t t = 0; t + 1 < prefix_predictions.size(); ++t)
    credit[t] = prefix_predictions[t + 1] - prefix_predictions[t];
  return credit;
}

}  // namespace geli
