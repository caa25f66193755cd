#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "geli/rng.hpp"
#include "geli/traj.hpp"

namespace geli {

/// Knobs of the joint objective. `rrd_k` switches the global term from the
/// exact sum decomposition to its subsampled estimator; `rng_seed` fixes the
/// subsets drawn by one loss evaluation, so a call is a pure function of its
/// arguments and per-trajectory streams agree between serial and batched
/// execution.
struct GeliConfig {
  double lambda = 0.5;
  std::optional<std::size_t> rrd_k;
  std::uint64_t rng_seed = 0;
};

struct IndexSubset {
  std::vector<std::size_t> indices;  // sorted, distinct, in [0, T)
};

/// Mean over trajectories of (R - sum_t r_t)^2.
double loss_ge(const std::vector<std::vector<double>>& rewards_per_step,
               const std::vector<double>& returns);

/// K distinct indices drawn uniformly from [0, horizon), returned sorted.
IndexSubset sample_index_subset(std::size_t horizon, std::size_t k, Rng& rng);

/// Subsampled return-decomposition loss: mean over trajectories of
/// (R - (T/K) * sum_{t in I} r_t)^2 with a fresh subset I per trajectory.
/// Subsets are drawn from streams derived from (seed, trajectory index).
/// With K = T the subset is the full index set and the value equals loss_ge.
double loss_rrd(const std::vector<std::vector<double>>& rewards_per_step,
                const std::vector<double>& returns, std::size_t k,
                std::uint64_t seed);

/// As loss_rrd but with caller-supplied subsets, one per trajectory.
double loss_rrd_with_subsets(
    const std::vector<std::vector<double>>& rewards_per_step,
    const std::vector<double>& returns,
    const std::vector<IndexSubset>& subsets);

/// Indicator score of a proxy label: 1 for the positive class, 0 otherwise.
/// A step without a label has no score; asking for one is an error.
double gamma_score(const std::optional<int>& mm_label);

/// Mean over labeled steps of (gamma - r)^2.
double loss_li(const std::vector<double>& rewards_per_labeled_step,
               const std::vector<int>& labels);

/// lambda * ge_part + (1 - lambda) * li_part, lambda in [0, 1].
double loss_geli(double ge_part, double li_part, double lambda);

enum class IrcrNorm { kMinMax, kZScore };

/// Per-step proxy rewards under trajectory-return normalization: every step
/// of a trajectory receives that trajectory's normalized return. Min-max
/// keeps proxies in [0, 1]; the z-score variant centers them instead. A
/// degenerate return spread (all returns equal) is an error; a constant
/// target carries no ranking signal and the mean baseline covers that case.
std::vector<std::vector<double>> ircr_proxy(const Dataset& dataset,
                                            IrcrNorm norm = IrcrNorm::kMinMax);

/// Per-step credit from a return predictor evaluated on history prefixes of
/// length 0..T: credit_t = prediction_{t+1} - prediction_t. The credits
/// telescope, so their sum is prediction_T - prediction_0.
std::vector<double> rudder_credit(const std::vector<double>& prefix_predictions);

}  // namespace geli
