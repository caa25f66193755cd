#include "geli/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "geli/errors.hpp"
#include "geli/losses.hpp"
#include "geli/rng.hpp"

namespace geli {
namespace {

LossId loss_for_method(Method method, const GeliConfig& geli) {
  switch (method) {
    case Method::kGeRrd: return geli.rrd_k ? LossId::kRRD : LossId::kGE;
    case Method::kGeliRrdVa: return LossId::kGELI;
    case Method::kLiOnly: return LossId::kLI;
    case Method::kGeRudder: return LossId::kRudderReturn;
    case Method::kGeIrcr:
      throw ConfigError("loss_for_method: IRCR trains by proxy regression");
  }
  throw ConfigError("loss_for_method: bad method enum value");
}

std::vector<double> dataset_returns(const Dataset& d) {
  std::vector<double> r;
  r.reserve(d.trajectories.size());
  for (const auto& traj : d.trajectories) r.push_back(traj.global_return);
  return r;
}

}  // namespace

std::vector<std::vector<double>> method_step_rewards(const RewardNet& net,
                                                     Method method,
                                                     const Dataset& dataset) {
  if (method != Method::kGeRudder) return per_step_rewards(net, dataset);
  std::vector<std::vector<double>> out;
  out.reserve(dataset.trajectories.size());
  for (const auto& traj : dataset.trajectories)
    out.push_back(rudder_credit(rudder_prefix_predictions(net, traj)));
  return out;
}

TrainResult train_reward(const Dataset& train, const Dataset& test,
                         const TrainOptions& opts,
                         const Checkpoint* resume) {
  if (train.trajectories.empty())
    throw DataError("train_reward: empty training split");
  const std::size_t input_dim = 2 * train.feature_dim();
  const std::size_t batch_size = resolve_batch_size(opts.train, opts.method);
  if (!(opts.train.lr > 0.0))
    throw ConfigError("train_reward: lr must be positive");

  if (method_uses_labels(opts.method)) {
    bool any_label = false;
    for (const auto& traj : train.trajectories)
      for (const auto& step : traj.steps)
        if (step.mm_label) any_label = true;
    if (!any_label)
      throw DataError("train_reward: method " + method_name(opts.method) +
                      " needs mm labels, but the training split has none");
  }

  TrainResult out;
  std::uint64_t start_epoch = 0;
  if (resume != nullptr) {
    if (resume->meta.kind != "reward_net")
      throw ArtifactError("train_reward: checkpoint kind '" +
                          resume->meta.kind + "' is not a reward net");
    if (resume->net.input_dim() != input_dim)
      throw ArtifactError(
          "train_reward: checkpoint input dimension " +
          std::to_string(resume->net.input_dim()) +
          " does not match the dataset's " + std::to_string(input_dim));
    out.net = resume->net;
    out.opt = resume->opt;
    start_epoch = resume->meta.epochs_done;
  } else {
    out.net = make_reward_net(input_dim, opts.train.hidden_width,
                              opts.train.hidden_layers, opts.train.activation,
                              Rng::derive(opts.init_seed, "net_init"));
    AdamWConfig adamw;
    adamw.lr = opts.train.lr;
    adamw.weight_decay = opts.train.weight_decay;
    out.opt = make_adamw(out.net.params, adamw);
  }
  out.epochs_done = std::max<std::uint64_t>(start_epoch, opts.train.epochs);

  // IRCR has no trajectory-level loss: the net regresses each step onto its
  // trajectory's normalized return. Targets are fixed for the whole run.
  std::vector<std::vector<double>> ircr_targets;
  if (opts.method == Method::kGeIrcr)
    ircr_targets = ircr_proxy(train, opts.train.ircr_norm);

  const std::size_t n = train.trajectories.size();
  const std::vector<double> test_returns = dataset_returns(test);

  for (std::uint64_t epoch = start_epoch; epoch < opts.train.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(Rng::derive(opts.init_seed, "shuffle", epoch));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < n; begin += batch_size, ++steps) {
      const std::size_t end = std::min(n, begin + batch_size);

      if (opts.method == Method::kGeIrcr) {
        std::vector<const Step*> batch_steps;
        std::vector<double> targets;
        for (std::size_t i = begin; i < end; ++i) {
          const auto& traj = train.trajectories[order[i]];
          const auto& proxies = ircr_targets[order[i]];
          for (std::size_t t = 0; t < traj.steps.size(); ++t) {
            batch_steps.push_back(&traj.steps[t]);
            targets.push_back(proxies[t]);
          }
        }
        const LossGradient lg =
            regression_gradient(out.net, batch_steps, targets);
        adamw_step(out.net.params, out.opt, lg.grad);
        loss_sum += lg.loss;
        continue;
      }

      std::vector<Trajectory> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i)
        batch.push_back(train.trajectories[order[i]]);

      // Fresh subset draws per optimizer step, keyed only by (epoch, step)
      // so an interrupted run resumes on the same stream.
      GeliConfig step_cfg = opts.geli;
      step_cfg.rng_seed = Rng::derive(opts.geli.rng_seed, "rrd_step", epoch,
                                      steps);
      const LossGradient lg = loss_gradient(
          out.net, batch, loss_for_method(opts.method, opts.geli), step_cfg);
      adamw_step(out.net.params, out.opt, lg.grad);
      loss_sum += lg.loss;
    }

    const std::uint64_t done = epoch + 1;
    const bool last = done == opts.train.epochs;
    const bool boundary =
        opts.train.eval_every > 0 && done % opts.train.eval_every == 0;
    if (last || boundary) {
      TrainLogEntry entry;
      entry.epoch = done;
      entry.train_loss = loss_sum / static_cast<double>(steps);
      if (!test.trajectories.empty())
        entry.test_mse = loss_ge(
            method_step_rewards(out.net, opts.method, test), test_returns);
      out.curve.push_back(entry);
    }
  }
  return out;
}

}  // namespace geli
