#include "geli/reward_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "geli/errors.hpp"
#include "geli/rng.hpp"

namespace geli {
namespace {

using nlohmann::json;

// Post-activation values per layer; acts[0] is the input, acts.back() the
// scalar pre-output (the head is linear).
struct Tape {
  std::vector<std::vector<double>> acts;
};

double activate(double z, Activation act) {
  return act == Activation::kTanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the post-activation value.
double activate_grad(double a, Activation act) {
  return act == Activation::kTanh ? 1.0 - a * a : (a > 0.0 ? 1.0 : 0.0);
}

double forward_tape(const RewardNet& net, const std::vector<double>& input,
                    Tape& tape) {
  const auto& ps = net.params;
  if (ps.weights.empty()) throw ConfigError("reward net has no layers");
  if (input.size() != ps.weights.front().cols)
    throw DataError("reward net input dimension mismatch: expected " +
                    std::to_string(ps.weights.front().cols) + ", got " +
                    std::to_string(input.size()));

  tape.acts.assign(ps.weights.size() + 1, {});
  tape.acts[0] = input;
  for (std::size_t l = 0; l < ps.weights.size(); ++l) {
    const Matrix& w = ps.weights[l];
    const auto& in = tape.acts[l];
    std::vector<double> out(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double z = ps.biases[l][r];
      const double* row = &w.a[r * w.cols];
      for (std::size_t c = 0; c < w.cols; ++c) z += row[c] * in[c];
      out[r] = l + 1 < ps.weights.size() ? activate(z, net.activation) : z;
    }
    tape.acts[l + 1] = std::move(out);
  }
  return tape.acts.back()[0];
}

// Accumulates d(loss)/d(params) for one forward pass into `grad`, given the
// gradient at the scalar output.
void backward(const RewardNet& net, const Tape& tape, double out_grad,
              ParamSet& grad) {
  const auto& ps = net.params;
  std::vector<double> delta{out_grad};
  for (std::size_t l = ps.weights.size(); l-- > 0;) {
    const Matrix& w = ps.weights[l];
    const auto& in = tape.acts[l];
    Matrix& gw = grad.weights[l];
    auto& gb = grad.biases[l];
    std::vector<double> prev(w.cols, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double d = delta[r];
      gb[r] += d;
      double* grow = &gw.a[r * w.cols];
      const double* row = &w.a[r * w.cols];
      for (std::size_t c = 0; c < w.cols; ++c) {
        grow[c] += d * in[c];
        prev[c] += d * row[c];
      }
    }
    if (l > 0)
      for (std::size_t c = 0; c < w.cols; ++c)
        prev[c] *= activate_grad(in[c], net.activation);
    delta = std::move(prev);
  }
}

std::vector<double> step_input(const Step& step) {
  std::vector<double> input;
  input.reserve(step.state_features.size() + step.action_features.size());
  input.insert(input.end(), step.state_features.begin(), step.state_features.end());
  input.insert(input.end(), step.action_features.begin(), step.action_features.end());
  return input;
}

const char* tensor_name(bool is_weight) { return is_weight ? "weights" : "biases"; }

void check_finite(const ParamSet& grads) {
  for (std::size_t l = 0; l < grads.weights.size(); ++l)
    for (double g : grads.weights[l].a)
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in layer " + std::to_string(l) +
                           " " + tensor_name(true));
  for (std::size_t l = 0; l < grads.biases.size(); ++l)
    for (double g : grads.biases[l])
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in layer " + std::to_string(l) +
                           " " + tensor_name(false));
}

}  // namespace

ParamSet ParamSet::zeros_like(const ParamSet& shape) {
  ParamSet out;
  out.weights.reserve(shape.weights.size());
  for (const auto& w : shape.weights) out.weights.emplace_back(w.rows, w.cols);
  out.biases.reserve(shape.biases.size());
  for (const auto& b : shape.biases) out.biases.emplace_back(b.size(), 0.0);
  return out;
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.a.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

RewardNet make_reward_net(std::size_t input_dim, std::size_t hidden_width,
                          std::size_t hidden_layers, Activation activation,
                          std::uint64_t seed) {
  if (input_dim == 0) throw ConfigError("reward net input_dim must be positive");
  if (hidden_layers > 0 && hidden_width == 0)
    throw ConfigError("reward net hidden_width must be positive");

  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    shapes.emplace_back(hidden_width, in);
    in = hidden_width;
  }
  shapes.emplace_back(1, in);

  RewardNet net;
  net.activation = activation;
  Rng rng(Rng::derive(seed, "glorot_init"));
  for (auto [rows, cols] : shapes) {
    Matrix w(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& x : w.a) x = (2.0 * rng.uniform() - 1.0) * limit;
    net.params.weights.push_back(std::move(w));
    net.params.biases.emplace_back(rows, 0.0);
  }
  return net;
}

double net_forward(const RewardNet& net, const std::vector<double>& input) {
  Tape tape;
  return forward_tape(net, input, tape);
}

double reward_forward(const RewardNet& net, const Step& step) {
  return net_forward(net, step_input(step));
}

std::vector<std::vector<double>> per_step_rewards(const RewardNet& net,
                                                  const Dataset& dataset) {
  std::vector<std::vector<double>> out;
  out.reserve(dataset.size());
  for (const auto& traj : dataset.trajectories) {
    std::vector<double> rewards;
    rewards.reserve(traj.steps.size());
    for (const auto& step : traj.steps)
      rewards.push_back(reward_forward(net, step));
    out.push_back(std::move(rewards));
  }
  return out;
}

std::vector<std::vector<double>> rudder_prefix_features(const Trajectory& traj) {
  if (traj.steps.empty()) throw DataError("prefix features: trajectory has no steps");
  const std::size_t dim =
      traj.steps.front().state_features.size() + traj.steps.front().action_features.size();
  std::vector<std::vector<double>> prefixes;
  prefixes.reserve(traj.steps.size() + 1);
  std::vector<double> sum(dim, 0.0);
  prefixes.emplace_back(sum);  // empty prefix
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto input = step_input(traj.steps[t]);
    if (input.size() != dim) throw DataError("prefix features: ragged step width");
    for (std::size_t j = 0; j < dim; ++j) sum[j] += input[j];
    std::vector<double> mean(dim);
    for (std::size_t j = 0; j < dim; ++j)
      mean[j] = sum[j] / static_cast<double>(t + 1);
    prefixes.push_back(std::move(mean));
  }
  return prefixes;
}

std::vector<double> rudder_prefix_predictions(const RewardNet& net,
                                              const Trajectory& traj) {
  std::vector<double> preds;
  for (const auto& prefix : rudder_prefix_features(traj))
    preds.push_back(net_forward(net, prefix));
  return preds;
}

namespace {

// Shared per-step machinery: runs the forward passes, lets the caller fill
// in d(loss)/d(reward) per step, then backpropagates every step once.
struct StepWork {
  std::vector<std::vector<Tape>> tapes;        // [traj][step]
  std::vector<std::vector<double>> rewards;    // [traj][step]
  std::vector<std::vector<double>> out_grads;  // [traj][step]
};

StepWork run_steps(const RewardNet& net, const std::vector<Trajectory>& batch) {
  StepWork work;
  work.tapes.resize(batch.size());
  work.rewards.resize(batch.size());
  work.out_grads.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& steps = batch[i].steps;
    if (steps.empty()) throw DataError("loss_gradient: trajectory has no steps");
    work.tapes[i].resize(steps.size());
    work.rewards[i].resize(steps.size());
    work.out_grads[i].assign(steps.size(), 0.0);
    for (std::size_t t = 0; t < steps.size(); ++t)
      work.rewards[i][t] = forward_tape(net, step_input(steps[t]), work.tapes[i][t]);
  }
  return work;
}

double add_ge_grads(const std::vector<Trajectory>& batch, StepWork& work) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double sum = 0.0;
    for (double r : work.rewards[i]) sum += r;
    const double resid = batch[i].global_return - sum;
    loss += resid * resid * inv_b;
    const double g = -2.0 * resid * inv_b;
    for (double& og : work.out_grads[i]) og += g;
  }
  return loss;
}

double add_rrd_grads(const std::vector<Trajectory>& batch, std::size_t k,
                     std::uint64_t seed, StepWork& work) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t horizon = work.rewards[i].size();
    Rng stream(Rng::derive(seed, "rrd_subset", i));
    const IndexSubset subset = sample_index_subset(horizon, k, stream);
    const double scale = static_cast<double>(horizon) / static_cast<double>(k);
    double sum = 0.0;
    for (std::size_t t : subset.indices) sum += work.rewards[i][t];
    const double resid = batch[i].global_return - scale * sum;
    loss += resid * resid * inv_b;
    const double g = -2.0 * resid * scale * inv_b;
    for (std::size_t t : subset.indices) work.out_grads[i][t] += g;
  }
  return loss;
}

double add_li_grads(const std::vector<Trajectory>& batch, double weight,
                    StepWork& work) {
  std::size_t labeled = 0;
  for (const auto& traj : batch)
    for (const auto& step : traj.steps)
      if (step.mm_label) ++labeled;
  if (labeled == 0)
    throw DataError("LI loss: batch has no labeled steps");

  const double inv_m = 1.0 / static_cast<double>(labeled);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) {
      const auto& label = batch[i].steps[t].mm_label;
      if (!label) continue;
      const double d = gamma_score(label) - work.rewards[i][t];
      loss += d * d * inv_m;
      work.out_grads[i][t] += weight * -2.0 * d * inv_m;
    }
  }
  return loss;
}

}  // namespace

LossGradient loss_gradient(const RewardNet& net,
                           const std::vector<Trajectory>& batch, LossId loss_id,
                           const GeliConfig& cfg) {
  if (batch.empty()) throw DataError("loss_gradient: empty batch");
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
    throw ConfigError("loss_gradient: lambda must lie in [0, 1]");

  LossGradient result;
  result.grad = ParamSet::zeros_like(net.params);

  if (loss_id == LossId::kRudderReturn) {
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& traj : batch) {
      const auto prefixes = rudder_prefix_features(traj);
      const double inv_k = 1.0 / static_cast<double>(prefixes.size());
      for (const auto& prefix : prefixes) {
        Tape tape;
        const double m = forward_tape(net, prefix, tape);
        const double resid = traj.global_return - m;
        result.loss += resid * resid * inv_b * inv_k;
        backward(net, tape, -2.0 * resid * inv_b * inv_k, result.grad);
      }
    }
    return result;
  }

  StepWork work = run_steps(net, batch);
  switch (loss_id) {
    case LossId::kGE:
      result.loss = add_ge_grads(batch, work);
      break;
    case LossId::kRRD: {
      if (!cfg.rrd_k) throw ConfigError("RRD loss requires cfg.rrd_k");
      result.loss = add_rrd_grads(batch, *cfg.rrd_k, cfg.rng_seed, work);
      break;
    }
    case LossId::kLI:
      result.loss = add_li_grads(batch, 1.0, work);
      break;
    case LossId::kGELI: {
      // Global term and per-step grads get weight lambda, LI gets 1-lambda.
      double ge_part;
      if (cfg.rrd_k) {
        ge_part = add_rrd_grads(batch, *cfg.rrd_k, cfg.rng_seed, work);
      } else {
        ge_part = add_ge_grads(batch, work);
      }
      for (auto& per_traj : work.out_grads)
        for (double& g : per_traj) g *= cfg.lambda;
      const double li_part = add_li_grads(batch, 1.0 - cfg.lambda, work);
      result.loss = loss_geli(ge_part, li_part, cfg.lambda);
      break;
    }
    default:
      throw ConfigError("loss_gradient: unknown loss id");
  }

  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < work.out_grads[i].size(); ++t)
      if (work.out_grads[i][t] != 0.0)
        backward(net, work.tapes[i][t], work.out_grads[i][t], result.grad);
  return result;
}

LossGradient regression_gradient(const RewardNet& net,
                                 const std::vector<const Step*>& steps,
                                 const std::vector<double>& targets) {
  if (steps.empty()) throw DataError("regression_gradient: empty batch");
  if (steps.size() != targets.size())
    throw DataError("regression_gradient: steps and targets disagree on size");

  LossGradient result;
  result.grad = ParamSet::zeros_like(net.params);
  const double inv_m = 1.0 / static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Tape tape;
    const double r = forward_tape(net, step_input(*steps[i]), tape);
    const double d = targets[i] - r;
    result.loss += d * d * inv_m;
    backward(net, tape, -2.0 * d * inv_m, result.grad);
  }
  return result;
}

AdamWState make_adamw(const ParamSet& shape, const AdamWConfig& cfg) {
  AdamWState state;
  state.cfg = cfg;
  state.m = ParamSet::zeros_like(shape);
  state.v = ParamSet::zeros_like(shape);
  return state;
}

namespace {

void adamw_tensor(double* p, double* m, double* v, const double* g,
                  std::size_t n, const AdamWConfig& cfg, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) +
            cfg.lr * cfg.weight_decay * p[i];
  }
}

}  // namespace

void adamw_step(ParamSet& params, AdamWState& state, const ParamSet& grads) {
  if (params.weights.size() != grads.weights.size() ||
      params.biases.size() != grads.biases.size())
    throw DataError("adamw_step: gradient shape mismatch");
  check_finite(grads);

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);

  for (std::size_t l = 0; l < params.weights.size(); ++l)
    adamw_tensor(params.weights[l].a.data(), state.m.weights[l].a.data(),
                 state.v.weights[l].a.data(), grads.weights[l].a.data(),
                 params.weights[l].a.size(), state.cfg, bc1, bc2);
  for (std::size_t l = 0; l < params.biases.size(); ++l)
    adamw_tensor(params.biases[l].data(), state.m.biases[l].data(),
                 state.v.biases[l].data(), grads.biases[l].data(),
                 params.biases[l].size(), state.cfg, bc1, bc2);
}

namespace {

constexpr char kMagic[] = "GELI-CKPT";
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_doubles(std::string& out, const double* xs, std::size_t n) {
  put_u64(out, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &xs[i], sizeof bits);
    put_u64(out, bits);
  }
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw ArtifactError("truncated checkpoint: " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i)
      x |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return x;
  }
  std::vector<double> doubles(std::size_t expect) {
    const std::uint64_t n = u64();
    if (n != expect)
      throw ArtifactError("checkpoint array length mismatch: " + path);
    std::vector<double> xs(n);
    for (auto& x : xs) {
      const std::uint64_t bits = u64();
      std::memcpy(&x, &bits, sizeof x);
    }
    return xs;
  }
};

void append_paramset(std::string& out, const ParamSet& ps) {
  for (std::size_t l = 0; l < ps.weights.size(); ++l) {
    put_doubles(out, ps.weights[l].a.data(), ps.weights[l].a.size());
    put_doubles(out, ps.biases[l].data(), ps.biases[l].size());
  }
}

ParamSet read_paramset(Reader& r, const std::vector<std::pair<std::size_t, std::size_t>>& shapes) {
  ParamSet ps;
  for (auto [rows, cols] : shapes) {
    Matrix w(rows, cols);
    w.a = r.doubles(rows * cols);
    ps.weights.push_back(std::move(w));
    ps.biases.push_back(r.doubles(rows));
  }
  return ps;
}

}  // namespace

void save_checkpoint(const std::string& path, const RewardNet& net,
                     const AdamWState& opt, const CheckpointMeta& meta) {
  json manifest;
  manifest["kind"] = meta.kind;
  manifest["epochs_done"] = meta.epochs_done;
  manifest["activation"] = net.activation == Activation::kTanh ? "tanh" : "relu";
  json layers = json::array();
  for (const auto& w : net.params.weights)
    layers.push_back(json::array({w.rows, w.cols}));
  manifest["layers"] = std::move(layers);
  manifest["adamw"] = {{"lr", opt.cfg.lr},
                       {"beta1", opt.cfg.beta1},
                       {"beta2", opt.cfg.beta2},
                       {"eps", opt.cfg.eps},
                       {"weight_decay", opt.cfg.weight_decay},
                       {"step_count", opt.step_count}};
  const std::string mstr = manifest.dump();

  std::string out;
  out.append(kMagic, sizeof kMagic - 1);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(mstr.size()));
  out.append(mstr);
  append_paramset(out, net.params);
  append_paramset(out, opt.m);
  append_paramset(out, opt.v);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ArtifactError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ArtifactError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  r.need(sizeof kMagic - 1);
  if (buf.compare(0, sizeof kMagic - 1, kMagic) != 0)
    throw ArtifactError("bad checkpoint magic: " + path);
  r.pos = sizeof kMagic - 1;
  if (r.u32() != kVersion)
    throw ArtifactError("unsupported checkpoint version: " + path);
  const std::uint32_t mlen = r.u32();
  r.need(mlen);
  json manifest;
  try {
    manifest = json::parse(buf.substr(r.pos, mlen));
  } catch (const json::parse_error&) {
    throw ArtifactError("corrupt checkpoint manifest: " + path);
  }
  r.pos += mlen;

  Checkpoint ckpt;
  try {
    ckpt.meta.kind = manifest.at("kind").get<std::string>();
    ckpt.meta.epochs_done = manifest.at("epochs_done").get<std::uint64_t>();
    const std::string act = manifest.at("activation").get<std::string>();
    ckpt.net.activation = act == "relu" ? Activation::kRelu : Activation::kTanh;
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    for (const auto& l : manifest.at("layers"))
      shapes.emplace_back(l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>());
    const auto& aw = manifest.at("adamw");
    AdamWConfig cfg;
    cfg.lr = aw.at("lr").get<double>();
    cfg.beta1 = aw.at("beta1").get<double>();
    cfg.beta2 = aw.at("beta2").get<double>();
    cfg.eps = aw.at("eps").get<double>();
    cfg.weight_decay = aw.at("weight_decay").get<double>();
    ckpt.net.params = read_paramset(r, shapes);
    ckpt.opt = make_adamw(ckpt.net.params, cfg);
    ckpt.opt.step_count = aw.at("step_count").get<std::uint64_t>();
    ckpt.opt.m = read_paramset(r, shapes);
    ckpt.opt.v = read_paramset(r, shapes);
  } catch (const json::exception&) {
    throw ArtifactError("corrupt checkpoint manifest: " + path);
  }
  return ckpt;
}

}  // namespace geli
