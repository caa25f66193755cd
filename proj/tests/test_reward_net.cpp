#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "geli/errors.hpp"
#include "geli/losses.hpp"
#include "geli/reward_net.hpp"
#include "geli/rng.hpp"
#include "geli/traj.hpp"
#include "geli/trainer.hpp"

namespace fs = std::filesystem;
using namespace geli;

namespace {

// Forward pass written independently of net_forward, straight from the
// layer layout contract: out = W x + b per layer, hidden layers squashed by
// the activation, last layer linear.
double ref_forward(const RewardNet& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.params.weights.size(); ++l) {
    const Matrix& w = net.params.weights[l];
    const auto& b = net.params.biases[l];
    std::vector<double> y(w.rows, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < w.cols; ++c) acc += w(r, c) * x[c];
      y[r] = acc;
    }
    if (l + 1 < net.params.weights.size()) {
      for (double& v : y)
        v = net.activation == Activation::kTanh ? std::tanh(v)
                                                : (v > 0.0 ? v : 0.0);
    }
    x = std::move(y);
  }
  return x[0];
}

// Small synthetic batch: feature_dim 2 per channel, T steps, labels on
// roughly half the steps.
std::vector<Trajectory> make_batch(std::size_t num_traj, std::size_t horizon,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Trajectory> batch;
  for (std::size_t i = 0; i < num_traj; ++i) {
    Trajectory traj;
    for (std::size_t t = 0; t < horizon; ++t) {
      Step s;
      s.state_features = {rng.normal(), rng.normal()};
      s.action_features = {rng.normal(), rng.normal()};
      if (rng.uniform() < 0.5) s.mm_label = rng.uniform() < 0.5 ? 0 : 1;
      traj.steps.push_back(std::move(s));
    }
    // Guarantee at least one labeled step per batch for the LI term.
    if (i == 0) traj.steps[0].mm_label = 1;
    traj.global_return = rng.normal() * 2.0;
    batch.push_back(std::move(traj));
  }
  return batch;
}

double& param_ref(ParamSet& p, std::size_t flat) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (flat < p.weights[l].a.size()) return p.weights[l].a[flat];
    flat -= p.weights[l].a.size();
    if (flat < p.biases[l].size()) return p.biases[l][flat];
    flat -= p.biases[l].size();
  }
  throw std::out_of_range("flat parameter index");
}

double param_val(const ParamSet& p, std::size_t flat) {
  return param_ref(const_cast<ParamSet&>(p), flat);
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("geli_net_test_" + name);
}

struct FileGuard {
  fs::path path;
  explicit FileGuard(fs::path p) : path(std::move(p)) {}
  ~FileGuard() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

RewardNet linear_net(const std::vector<double>& weights) {
  RewardNet net;
  Matrix w(1, weights.size());
  for (std::size_t c = 0; c < weights.size(); ++c) w(0, c) = weights[c];
  net.params.weights = {w};
  net.params.biases = {{0.0}};
  return net;
}

}  // namespace

TEST_CASE("a freshly built net with zeroed parameters outputs zero") {
  auto net = make_reward_net(4, 3, 1, Activation::kTanh, 1);
  for (auto& w : net.params.weights) std::fill(w.a.begin(), w.a.end(), 0.0);
  CHECK(net_forward(net, {1.0, -2.0, 3.0, 4.0}) == 0.0);
}

TEST_CASE("a single linear layer computes the dot product") {
  const auto net = linear_net({1.0, 1.0, 1.0, 1.0});
  CHECK(net_forward(net, {0.5, 0.5, 0.5, 0.5}) == doctest::Approx(2.0));

  Step step;
  step.state_features = {0.5, 0.5};
  step.action_features = {0.5, 0.5};
  CHECK(reward_forward(net, step) == doctest::Approx(2.0));
}

TEST_CASE("net_forward agrees with an independent reimplementation") {
  Rng rng(77);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto net = make_reward_net(4, 5, 2, Activation::kTanh, seed);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> x = {rng.normal(), rng.normal(), rng.normal(),
                               rng.normal()};
      CHECK(net_forward(net, x) == doctest::Approx(ref_forward(net, x)).epsilon(1e-12));
    }
  }
  const auto relu_net = make_reward_net(4, 5, 1, Activation::kRelu, 9);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x = {rng.normal(), rng.normal(), rng.normal(),
                             rng.normal()};
    CHECK(net_forward(relu_net, x) ==
          doctest::Approx(ref_forward(relu_net, x)).epsilon(1e-12));
  }
}

TEST_CASE("make_reward_net respects the requested shape and seed") {
  const auto net = make_reward_net(6, 4, 2, Activation::kTanh, 42);
  REQUIRE(net.params.weights.size() == 3);
  CHECK(net.params.weights[0].rows == 4);
  CHECK(net.params.weights[0].cols == 6);
  CHECK(net.params.weights[1].rows == 4);
  CHECK(net.params.weights[1].cols == 4);
  CHECK(net.params.weights[2].rows == 1);
  CHECK(net.params.weights[2].cols == 4);
  for (const auto& b : net.params.biases)
    for (double v : b) CHECK(v == 0.0);

  // Glorot range per layer.
  for (const auto& w : net.params.weights) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(w.rows + w.cols)) + 1e-12;
    for (double v : w.a) {
      CHECK(v <= limit);
      CHECK(v >= -limit);
    }
  }

  const auto same = make_reward_net(6, 4, 2, Activation::kTanh, 42);
  CHECK(same.params.weights[0].a == net.params.weights[0].a);
  const auto other = make_reward_net(6, 4, 2, Activation::kTanh, 43);
  CHECK(other.params.weights[0].a != net.params.weights[0].a);
}

TEST_CASE("per_step_rewards matches reward_forward step by step") {
  const auto net = make_reward_net(4, 3, 1, Activation::kTanh, 5);
  Dataset ds;
  for (const auto& batch_traj : make_batch(3, 4, 11))
    ds.trajectories.push_back(batch_traj);
  const auto rewards = per_step_rewards(net, ds);
  REQUIRE(rewards.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    REQUIRE(rewards[i].size() == ds.trajectories[i].steps.size());
    for (std::size_t t = 0; t < rewards[i].size(); ++t)
      CHECK(rewards[i][t] == reward_forward(net, ds.trajectories[i].steps[t]));
  }
}

TEST_CASE("rudder_prefix_features averages the concatenated step inputs") {
  Trajectory traj;
  Step s0;
  s0.state_features = {1.0, 2.0};
  s0.action_features = {3.0, 4.0};
  Step s1;
  s1.state_features = {5.0, 6.0};
  s1.action_features = {7.0, 8.0};
  traj.steps = {s0, s1};

  const auto prefixes = rudder_prefix_features(traj);
  REQUIRE(prefixes.size() == 3);
  CHECK(prefixes[0] == std::vector<double>{0.0, 0.0, 0.0, 0.0});
  CHECK(prefixes[1] == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(prefixes[2] == std::vector<double>{3.0, 4.0, 5.0, 6.0});

  const auto net = make_reward_net(4, 3, 1, Activation::kTanh, 2);
  const auto preds = rudder_prefix_predictions(net, traj);
  REQUIRE(preds.size() == 3);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(preds[k] == net_forward(net, prefixes[k]));
}

TEST_CASE("GE gradient of a zeroed net matches the hand formula") {
  // With all parameters zero every step reward is 0, so the GE residual is
  // the raw return and d loss / d output_bias = -2 * mean_i(T_i * R_i).
  auto net = make_reward_net(4, 3, 1, Activation::kTanh, 3);
  for (auto& w : net.params.weights) std::fill(w.a.begin(), w.a.end(), 0.0);

  auto batch = make_batch(4, 5, 21);
  double expect = 0.0;
  for (const auto& traj : batch)
    expect += static_cast<double>(traj.steps.size()) * traj.global_return;
  expect *= -2.0 / static_cast<double>(batch.size());

  const auto lg = loss_gradient(net, batch, LossId::kGE, GeliConfig{});
  CHECK(lg.grad.biases.back()[0] == doctest::Approx(expect).epsilon(1e-9));
  double loss_expect = 0.0;
  for (const auto& traj : batch)
    loss_expect += traj.global_return * traj.global_return;
  loss_expect /= static_cast<double>(batch.size());
  CHECK(lg.loss == doctest::Approx(loss_expect).epsilon(1e-12));
}

TEST_CASE("duplicating every trajectory leaves mean-reduced losses unchanged") {
  const auto net = make_reward_net(4, 3, 1, Activation::kTanh, 6);
  auto batch = make_batch(3, 4, 31);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  GeliConfig cfg;
  cfg.lambda = 0.5;
  const auto a = loss_gradient(net, batch, LossId::kGE, cfg);
  const auto b = loss_gradient(net, doubled, LossId::kGE, cfg);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
  const auto la = loss_gradient(net, batch, LossId::kLI, cfg);
  const auto lb = loss_gradient(net, doubled, LossId::kLI, cfg);
  CHECK(la.loss == doctest::Approx(lb.loss).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  // Relative error under 1e-4 with step 1e-5, for every objective and five
  // weight-init seeds.
  const double h = 1e-5;
  const double tol = 1e-4;

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto batch = make_batch(3, 6, 100 + seed);
    GeliConfig cfg;
    cfg.lambda = 0.4;
    cfg.rrd_k = 3;
    cfg.rng_seed = 11;

    for (LossId id : {LossId::kGE, LossId::kRRD, LossId::kLI, LossId::kGELI,
                      LossId::kRudderReturn}) {
      auto net = make_reward_net(4, 3, 1, Activation::kTanh, seed);
      const auto lg = loss_gradient(net, batch, id, cfg);
      const std::size_t n = net.params.count();
      REQUIRE(n == lg.grad.count());

      for (std::size_t flat = 0; flat < n; ++flat) {
        double& p = param_ref(net.params, flat);
        const double saved = p;
        p = saved + h;
        const double up = loss_gradient(net, batch, id, cfg).loss;
        p = saved - h;
        const double down = loss_gradient(net, batch, id, cfg).loss;
        p = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = param_val(lg.grad, flat);
        const double denom = std::max(1e-8, std::abs(fd) + std::abs(an));
        CHECK_MESSAGE(std::abs(fd - an) / denom < tol, "loss ",
                      static_cast<int>(id), " seed ", seed, " param ", flat,
                      " fd=", fd, " an=", an);
      }
    }
  }
}

TEST_CASE("regression_gradient matches finite differences") {
  auto net = make_reward_net(4, 3, 1, Activation::kTanh, 8);
  const auto batch = make_batch(2, 3, 51);
  std::vector<const Step*> steps;
  std::vector<double> targets;
  Rng rng(4);
  for (const auto& traj : batch)
    for (const auto& s : traj.steps) {
      steps.push_back(&s);
      targets.push_back(rng.normal());
    }

  const auto lg = regression_gradient(net, steps, targets);
  const double h = 1e-5;
  for (std::size_t flat = 0; flat < net.params.count(); ++flat) {
    double& p = param_ref(net.params, flat);
    const double saved = p;
    p = saved + h;
    const double up = regression_gradient(net, steps, targets).loss;
    p = saved - h;
    const double down = regression_gradient(net, steps, targets).loss;
    p = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = param_val(lg.grad, flat);
    const double denom = std::max(1e-8, std::abs(fd) + std::abs(an));
    CHECK(std::abs(fd - an) / denom < 1e-4);
  }
}

TEST_CASE("loss_gradient value agrees with the standalone loss functions") {
  const auto net = make_reward_net(4, 3, 1, Activation::kTanh, 12);
  const auto batch = make_batch(3, 5, 61);
  std::vector<std::vector<double>> rewards;
  std::vector<double> returns;
  Dataset ds;
  for (const auto& traj : batch) {
    ds.trajectories.push_back(traj);
    returns.push_back(traj.global_return);
  }
  rewards = per_step_rewards(net, ds);

  GeliConfig cfg;
  cfg.rrd_k = 2;
  cfg.rng_seed = 17;
  CHECK(loss_gradient(net, batch, LossId::kGE, cfg).loss ==
        doctest::Approx(loss_ge(rewards, returns)).epsilon(1e-12));
  CHECK(loss_gradient(net, batch, LossId::kRRD, cfg).loss ==
        doctest::Approx(loss_rrd(rewards, returns, 2, 17)).epsilon(1e-12));

  std::vector<double> labeled_rewards;
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t)
      if (batch[i].steps[t].mm_label) {
        labeled_rewards.push_back(rewards[i][t]);
        labels.push_back(*batch[i].steps[t].mm_label);
      }
  CHECK(loss_gradient(net, batch, LossId::kLI, cfg).loss ==
        doctest::Approx(loss_li(labeled_rewards, labels)).epsilon(1e-12));
}

TEST_CASE("loss_gradient validates its preconditions") {
  const auto net = make_reward_net(4, 3, 1, Activation::kTanh, 1);
  CHECK_THROWS_AS(loss_gradient(net, {}, LossId::kGE, GeliConfig{}), DataError);

  auto batch = make_batch(2, 3, 71);
  GeliConfig no_k;
  no_k.rrd_k.reset();
  CHECK_THROWS_AS(loss_gradient(net, batch, LossId::kRRD, no_k), ConfigError);

  for (auto& traj : batch)
    for (auto& s : traj.steps) s.mm_label.reset();
  CHECK_THROWS_AS(loss_gradient(net, batch, LossId::kLI, GeliConfig{}),
                  DataError);
}

TEST_CASE("adamw_step reproduces a hand-computed first update") {
  // One parameter at 1.0, gradient 1.0, lr 0.1: after bias correction both
  // moment estimates are exactly 1, so the step is lr / (1 + eps).
  RewardNet net = linear_net({1.0});
  AdamWConfig cfg;
  cfg.lr = 0.1;
  auto state = make_adamw(net.params, cfg);
  ParamSet grads = ParamSet::zeros_like(net.params);
  grads.weights[0].a[0] = 1.0;

  adamw_step(net.params, state, grads);
  CHECK(net.params.weights[0].a[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(state.step_count == 1);
  CHECK(state.m.weights[0].a[0] == doctest::Approx(0.1));
  CHECK(state.v.weights[0].a[0] == doctest::Approx(0.001));
}

TEST_CASE("weight decay is decoupled from the moment step") {
  RewardNet net = linear_net({2.0});
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  auto state = make_adamw(net.params, cfg);
  const ParamSet zero_grads = ParamSet::zeros_like(net.params);

  adamw_step(net.params, state, zero_grads);
  // Zero gradient leaves the moments at zero; only the decay acts:
  // p <- p - lr * wd * p.
  CHECK(net.params.weights[0].a[0] == doctest::Approx(2.0 * (1.0 - 0.001)));
}

TEST_CASE("a zero gradient with zero decay is a no-op") {
  RewardNet net = linear_net({1.5, -2.5});
  auto state = make_adamw(net.params, AdamWConfig{});
  const ParamSet zero_grads = ParamSet::zeros_like(net.params);
  adamw_step(net.params, state, zero_grads);
  CHECK(net.params.weights[0].a[0] == 1.5);
  CHECK(net.params.weights[0].a[1] == -2.5);
}

TEST_CASE("non-finite gradients are rejected") {
  RewardNet net = linear_net({1.0});
  auto state = make_adamw(net.params, AdamWConfig{});
  ParamSet grads = ParamSet::zeros_like(net.params);
  grads.weights[0].a[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adamw_step(net.params, state, grads);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("checkpoints round-trip bitwise") {
  auto net = make_reward_net(4, 3, 2, Activation::kRelu, 19);
  AdamWConfig cfg;
  cfg.lr = 0.03;
  cfg.weight_decay = 0.004;
  auto opt = make_adamw(net.params, cfg);
  // Take a couple of real steps so the moments are nontrivial.
  const auto batch = make_batch(2, 3, 81);
  for (int i = 0; i < 2; ++i) {
    const auto lg = loss_gradient(net, batch, LossId::kGE, GeliConfig{});
    adamw_step(net.params, opt, lg.grad);
  }
  CheckpointMeta meta;
  meta.kind = "reward_net";
  meta.epochs_done = 7;

  const auto path = temp_file("roundtrip.ckpt");
  FileGuard guard(path);
  save_checkpoint(path.string(), net, opt, meta);
  const auto loaded = load_checkpoint(path.string());

  CHECK(loaded.meta.kind == "reward_net");
  CHECK(loaded.meta.epochs_done == 7);
  CHECK(loaded.net.activation == Activation::kRelu);
  REQUIRE(loaded.net.params.weights.size() == net.params.weights.size());
  for (std::size_t l = 0; l < net.params.weights.size(); ++l) {
    CHECK(loaded.net.params.weights[l].a == net.params.weights[l].a);
    CHECK(loaded.net.params.biases[l] == net.params.biases[l]);
    CHECK(loaded.opt.m.weights[l].a == opt.m.weights[l].a);
    CHECK(loaded.opt.v.weights[l].a == opt.v.weights[l].a);
  }
  CHECK(loaded.opt.step_count == opt.step_count);
  CHECK(loaded.opt.cfg.lr == cfg.lr);
  CHECK(loaded.opt.cfg.weight_decay == cfg.weight_decay);
}

TEST_CASE("loading a non-checkpoint file fails cleanly") {
  const auto path = temp_file("junk.ckpt");
  FileGuard guard(path);
  std::ofstream out(path, std::ios::binary);
  out << "this is not a checkpoint";
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path.string()), ArtifactError);
  CHECK_THROWS_AS(load_checkpoint(temp_file("absent.ckpt").string()),
                  ArtifactError);
}

TEST_CASE("a truncated checkpoint fails cleanly") {
  auto net = make_reward_net(4, 3, 1, Activation::kTanh, 23);
  auto opt = make_adamw(net.params, AdamWConfig{});
  const auto path = temp_file("full.ckpt");
  FileGuard guard(path);
  save_checkpoint(path.string(), net, opt, CheckpointMeta{});

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();
  REQUIRE(bytes.size() > 32);

  const auto cut = temp_file("cut.ckpt");
  FileGuard guard2(cut);
  std::ofstream out(cut, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(cut.string()), ArtifactError);
}

TEST_CASE("training resumed from a checkpoint retraces the full run") {
  // Train 6 epochs in one go, and 3 + 3 through a mid-run checkpoint; the
  // final parameters must be bitwise identical.
  Dataset train;
  for (auto& traj : make_batch(12, 4, 91)) train.trajectories.push_back(traj);
  Dataset test;
  for (auto& traj : make_batch(4, 4, 92)) test.trajectories.push_back(traj);

  TrainOptions opts;
  opts.method = Method::kGeliRrdVa;
  opts.geli.lambda = 0.5;
  opts.geli.rrd_k = 2;
  opts.geli.rng_seed = 7;
  opts.train.lr = 1e-3;
  opts.train.hidden_width = 4;
  opts.train.hidden_layers = 1;
  opts.train.epochs = 6;
  opts.train.eval_every = 2;
  opts.train.batch_size = 4;
  opts.init_seed = 13;

  const auto full = train_reward(train, test, opts);

  auto half_opts = opts;
  half_opts.train.epochs = 3;
  const auto half = train_reward(train, test, half_opts);
  Checkpoint midpoint;
  midpoint.net = half.net;
  midpoint.opt = half.opt;
  midpoint.meta.kind = "reward_net";
  midpoint.meta.epochs_done = half.epochs_done;

  const auto resumed = train_reward(train, test, opts, &midpoint);

  CHECK(full.epochs_done == 6);
  CHECK(resumed.epochs_done == 6);
  REQUIRE(full.net.params.weights.size() == resumed.net.params.weights.size());
  for (std::size_t l = 0; l < full.net.params.weights.size(); ++l) {
    CHECK(full.net.params.weights[l].a == resumed.net.params.weights[l].a);
    CHECK(full.net.params.biases[l] == resumed.net.params.biases[l]);
  }
  REQUIRE(!full.curve.empty());
  CHECK(full.curve.back().epoch == 6);
  REQUIRE(full.curve.back().test_mse.has_value());
}
