#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geli/losses.hpp"
#include "geli/traj.hpp"

namespace geli {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

/// Weights and biases of a feed-forward stack (also reused as a gradient
/// buffer and as optimizer moment storage, since those share the shape).
struct ParamSet {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static ParamSet zeros_like(const ParamSet& shape);
  std::size_t count() const;
};

enum class Activation { kTanh, kRelu };

/// Scalar-output MLP over the concatenated (state, action) features of a
/// turn. The final layer is linear; hidden layers use `activation`.
struct RewardNet {
  ParamSet params;
  Activation activation = Activation::kTanh;

  std::size_t input_dim() const {
    return params.weights.empty() ? 0 : params.weights.front().cols;
  }
};

/// Builds a net with `hidden_layers` hidden layers of width `hidden_width`
/// (zero hidden layers gives a single linear map). Weights are drawn from
/// the uniform Glorot range +-sqrt(6 / (fan_in + fan_out)), biases start at
/// zero; `seed` fixes the draw.
RewardNet make_reward_net(std::size_t input_dim, std::size_t hidden_width,
                          std::size_t hidden_layers, Activation activation,
                          std::uint64_t seed);

/// Forward pass on a raw input vector (must match input_dim).
double net_forward(const RewardNet& net, const std::vector<double>& input);

/// Forward pass on a turn: input is state features followed by action
/// features.
double reward_forward(const RewardNet& net, const Step& step);

/// Predicted reward for every step of every trajectory.
std::vector<std::vector<double>> per_step_rewards(const RewardNet& net,
                                                  const Dataset& dataset);

/// Inputs for a prefix-return predictor: entry k is the mean of the
/// concatenated step features over the first k turns (k = 0 gives the zero
/// vector), so a predictor sees prefixes of length 0..T.
std::vector<std::vector<double>> rudder_prefix_features(const Trajectory& traj);

/// Prefix-return predictions for one trajectory, evaluated with `net`.
std::vector<double> rudder_prefix_predictions(const RewardNet& net,
                                              const Trajectory& traj);

enum class LossId { kGE, kRRD, kLI, kGELI, kRudderReturn };

struct LossGradient {
  double loss = 0.0;
  ParamSet grad;
};

/// Loss value and its exact parameter gradient on a batch of trajectories.
///
/// Per-step reward gradients are closed forms of the losses in losses.hpp
/// and are backpropagated through the net:
///   GE    d/dr_t = -2/B * (R - sum r)
///   RRD   d/dr_t = -2/B * (T/K) * resid for t in the trajectory's subset
///   LI    d/dr_t = -2/M * (gamma_t - r_t) over the M labeled steps
///   GELI  lambda-weighted sum of the global term (RRD if cfg.rrd_k is set,
///         GE otherwise) and the LI term
/// kRudderReturn regresses every prefix prediction onto the trajectory
/// return: mean over trajectories and prefixes of (R - m_k)^2.
/// RRD subsets are derived from (cfg.rng_seed, trajectory index), so the
/// value matches loss_rrd called with the same seed.
LossGradient loss_gradient(const RewardNet& net,
                           const std::vector<Trajectory>& batch, LossId loss_id,
                           const GeliConfig& cfg);

/// Mean squared error of net outputs against per-step targets, with
/// gradient. This is the supervised path used for proxy-reward regression.
LossGradient regression_gradient(const RewardNet& net,
                                 const std::vector<const Step*>& steps,
                                 const std::vector<double>& targets);

struct AdamWConfig {
  double lr = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  AdamWConfig cfg;
  ParamSet m, v;
  std::uint64_t step_count = 0;
};

AdamWState make_adamw(const ParamSet& shape, const AdamWConfig& cfg);

/// One AdamW update: bias-corrected moment step plus decoupled weight decay
/// (decay multiplies the parameter directly and bypasses the moments).
/// Non-finite gradients raise NumericError naming the offending tensor.
void adamw_step(ParamSet& params, AdamWState& state, const ParamSet& grads);

struct CheckpointMeta {
  std::string kind = "reward_net";
  std::uint64_t epochs_done = 0;
};

struct Checkpoint {
  RewardNet net;
  AdamWState opt;
  CheckpointMeta meta;
};

/// Binary checkpoint: magic "GELI-CKPT", a version integer, a JSON shape
/// manifest, then length-prefixed little-endian IEEE-754 double arrays
/// (per-layer weights and biases, then both optimizer moments).
void save_checkpoint(const std::string& path, const RewardNet& net,
                     const AdamWState& opt, const CheckpointMeta& meta);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace geli
