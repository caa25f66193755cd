#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "geli/config.hpp"
#include "geli/reward_net.hpp"
#include "geli/traj.hpp"

namespace geli {

struct TrainOptions {
  Method method = Method::kGeRrd;
  GeliConfig geli;
  RewardTrainConfig train;
  /// Base stream for weight init and epoch shuffles. Subset draws for the
  /// randomized decomposition derive from geli.rng_seed instead.
  std::uint64_t init_seed = 0;
};

struct TrainLogEntry {
  std::uint64_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> test_mse;
};

struct TrainResult {
  RewardNet net;
  AdamWState opt;
  std::uint64_t epochs_done = 0;
  std::vector<TrainLogEntry> curve;
};

/// Trains a reward net on the train split with the method's objective.
/// Deterministic: epoch shuffles and subset draws come from streams derived
/// per (seed, epoch, step), so a run resumed from `resume` (a checkpoint
/// saved mid-training) continues on the exact parameter trajectory of an
/// uninterrupted run. The curve gains an entry every eval_every epochs and
/// at the final epoch; test_mse is filled when the test split is nonempty.
TrainResult train_reward(const Dataset& train, const Dataset& test,
                         const TrainOptions& opts,
                         const Checkpoint* resume = nullptr);

/// Per-step rewards under a method's read-out convention: the predictive-
/// difference method scores steps by consecutive prefix-prediction gaps,
/// everything else reads the net directly on each step.
std::vector<std::vector<double>> method_step_rewards(const RewardNet& net,
                                                     Method method,
                                                     const Dataset& dataset);

}  // namespace geli
