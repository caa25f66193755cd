#include "geli/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "geli/errors.hpp"
#include "geli/eval.hpp"
#include "geli/policy.hpp"
#include "geli/rng.hpp"
#include "geli/synth.hpp"
#include "geli/trainer.hpp"

namespace geli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string to_hex(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(x));
  return buf;
}

// One run per workdir at a time. The lock file holds the owner's pid; a
// crash leaves it behind, and the error message tells the user what to do.
class WorkdirLock {
 public:
  explicit WorkdirLock(std::string path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw ArtifactError("workdir is locked ('" + path_ +
                          "' exists); another run may be active, or a "
                          "crashed one left the file behind");
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // the lock still works without its payload
    }
  }
  ~WorkdirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

std::string fingerprint_over(const ExperimentConfig& cfg,
                             const std::vector<std::string>& prefixes) {
  const auto flat = to_flat_map(cfg);
  std::string blob;
  for (const auto& [key, value] : flat) {
    for (const auto& prefix : prefixes) {
      if (key.rfind(prefix, 0) == 0) {
        blob += key;
        blob += '=';
        blob += value;
        blob += '\n';
        break;
      }
    }
  }
  return to_hex(fnv1a64(blob));
}

// The config keys a stage's outputs actually depend on. A change outside a
// stage's key set leaves its record valid.
std::string stage_fingerprint(const ExperimentConfig& cfg,
                              const std::string& stage) {
  if (stage == "generate") return fingerprint_over(cfg, {"env."});
  if (stage.rfind("train:", 0) == 0 || stage.rfind("eval:", 0) == 0)
    return fingerprint_over(cfg,
                            {"env.", "split.", "geli.", "reward_train."});
  if (stage == "adapt")
    return fingerprint_over(
        cfg, {"env.", "split.", "geli.", "reward_train.", "ppo."});
  if (stage == "report") return fingerprint_over(cfg, {"methods"});
  throw ArtifactError("unknown stage '" + stage + "'");
}

std::vector<std::string> stage_prereqs(const std::string& stage,
                                       const ExperimentConfig& cfg) {
  if (stage == "generate") return {};
  if (stage.rfind("train:", 0) == 0) return {"generate"};
  if (stage.rfind("eval:", 0) == 0) {
    const std::string tag = stage.substr(5);
    if (tag == "Mean" || tag == "Mode") return {"generate"};
    return {"generate", "train:" + tag};
  }
  if (stage == "adapt") return {"generate", "train:GELI_RRD_VA"};
  if (stage == "report") {
    std::vector<std::string> pre = {"eval:Mean", "eval:Mode"};
    for (Method m : cfg.methods) pre.push_back("eval:" + method_name(m));
    return pre;
  }
  throw ArtifactError("unknown stage '" + stage + "'");
}

bool stage_fresh(const RunManifest& man, const std::string& stage,
                 const ExperimentConfig& cfg) {
  const auto it = man.stages.find(stage);
  if (it == man.stages.end()) return false;
  if (it->second.fingerprint != stage_fingerprint(cfg, stage)) return false;
  for (const auto& [path, hash] : it->second.outputs) {
    std::error_code ec;
    if (!fs::exists(path, ec) || ec) return false;
    if (hash_file(path) != hash) return false;
  }
  for (const auto& pre : stage_prereqs(stage, cfg))
    if (!stage_fresh(man, pre, cfg)) return false;
  return true;
}

void require_prereqs(const RunManifest& man, const std::string& stage,
                     const ExperimentConfig& cfg) {
  for (const auto& pre : stage_prereqs(stage, cfg))
    if (!stage_fresh(man, pre, cfg))
      throw ArtifactError("stage '" + stage + "' needs stage '" + pre +
                          "', which is missing, stale, or was modified; "
                          "rerun it first");
}

void record_stage(RunManifest& man, const RunPaths& paths,
                  const std::string& stage, const ExperimentConfig& cfg,
                  const std::vector<std::string>& outputs) {
  StageRecord rec;
  rec.fingerprint = stage_fingerprint(cfg, stage);
  rec.completed_at = now_utc();
  for (const auto& path : outputs) rec.outputs[path] = hash_file(path);
  man.stages[stage] = std::move(rec);
  man.config = to_flat_map(cfg);
  man.save(paths.manifest);
}

struct LoadedData {
  LabeledSplits splits;
  std::size_t total = 0;
};

LoadedData load_splits(const ExperimentConfig& cfg, const RunPaths& paths) {
  FeatureSpec spec;
  spec.dimension = cfg.env.feature_dim;
  spec.mode = FeatureMode::kPrecomputed;
  const Dataset dataset = load_jsonl(paths.dataset, spec);
  const GroundTruth truth = load_ground_truth(paths.truth);
  LoadedData d;
  d.total = dataset.size();
  d.splits =
      split_with_truth(dataset, truth, cfg.split_fractions, cfg.split_seed);
  return d;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write '" + path + "'");
  out << content;
  if (!out.good()) throw ArtifactError("failed while writing '" + path + "'");
}

EvalReport make_eval_report(const std::string& tag,
                            const std::vector<std::vector<double>>& rewards,
                            const Dataset& test, const GroundTruth& truth) {
  EvalReport rep;
  rep.method_tag = tag;
  rep.decomposition = eval_decomposition(rewards, test);
  rep.delta_li = eval_delta_li(rewards, test);
  rep.oracle = oracle_eval(rewards, truth);
  return rep;
}

// Eval artifacts carry the raw per-step rewards so every aggregate in the
// final table can be recomputed from the file alone.
std::string eval_report_json(const EvalReport& rep,
                             const std::vector<std::vector<double>>& rewards) {
  json j;
  j["method_tag"] = rep.method_tag;
  j["l_ge_mse"] = rep.decomposition.mse;
  j["l_ge_mae"] = rep.decomposition.mae;
  j["mean_r_pos"] = rep.delta_li.mean_reward_positive;
  j["mean_r_nonpos"] = rep.delta_li.mean_reward_nonpositive;
  j["delta_r_li"] = rep.delta_li.delta;
  if (rep.oracle) {
    j["oracle"] = {{"pearson_r", rep.oracle->pearson_r},
                   {"aligned_mse", rep.oracle->aligned_mse},
                   {"sign_agreement", rep.oracle->sign_agreement},
                   {"degenerate", rep.oracle->degenerate}};
  } else {
    j["oracle"] = nullptr;
  }
  j["per_step_rewards"] = rewards;
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read eval artifact '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ArtifactError("eval artifact '" + path +
                        "' is not valid JSON: " + e.what());
  }
  EvalReport rep;
  try {
    rep.method_tag = j.at("method_tag").get<std::string>();
    rep.decomposition.mse = j.at("l_ge_mse").get<double>();
    rep.decomposition.mae = j.at("l_ge_mae").get<double>();
    rep.delta_li.mean_reward_positive = j.at("mean_r_pos").get<double>();
    rep.delta_li.mean_reward_nonpositive = j.at("mean_r_nonpos").get<double>();
    rep.delta_li.delta = j.at("delta_r_li").get<double>();
    if (!j.at("oracle").is_null()) {
      OracleReport oracle;
      oracle.pearson_r = j["oracle"].at("pearson_r").get<double>();
      oracle.aligned_mse = j["oracle"].at("aligned_mse").get<double>();
      oracle.sign_agreement = j["oracle"].at("sign_agreement").get<double>();
      oracle.degenerate = j["oracle"].at("degenerate").get<bool>();
      rep.oracle = oracle;
    }
  } catch (const json::exception& e) {
    throw ArtifactError("eval artifact '" + path +
                        "' has an unexpected shape: " + e.what());
  }
  return rep;
}

struct Ctx {
  RunPaths paths;
  RunManifest man;
  std::unique_ptr<WorkdirLock> lock;
};

Ctx open_ctx(const ExperimentConfig& cfg) {
  Ctx ctx;
  ctx.paths = RunPaths::resolve(cfg);
  std::error_code ec;
  fs::create_directories(ctx.paths.workdir, ec);
  const fs::path dataset_parent = fs::path(ctx.paths.dataset).parent_path();
  if (!dataset_parent.empty()) fs::create_directories(dataset_parent, ec);
  fs::create_directories(ctx.paths.checkpoint_dir, ec);
  fs::create_directories(ctx.paths.report_dir, ec);
  fs::create_directories(ctx.paths.log_dir, ec);
  fs::create_directories(ctx.paths.eval_dir, ec);
  ctx.lock = std::make_unique<WorkdirLock>(ctx.paths.lock);
  ctx.man = RunManifest::load(ctx.paths.manifest);
  return ctx;
}

void do_generate(const ExperimentConfig& cfg, Ctx& ctx,
                 const StageOptions& opts) {
  const std::string stage = "generate";
  if (!opts.force && stage_fresh(ctx.man, stage, cfg)) {
    std::printf("[generate] up to date\n");
    return;
  }
  if (!opts.force && (fs::exists(ctx.paths.dataset) ||
                      fs::exists(ctx.paths.truth)))
    throw ArtifactError("'" + ctx.paths.dataset +
                        "' exists but does not match this config; pass "
                        "--force to regenerate");
  // A regenerated dataset invalidates everything built on the old one.
  if (opts.force) ctx.man.stages.clear();

  const SynthData data = generate(cfg.env);
  save_jsonl(data.dataset, ctx.paths.dataset, FeatureMode::kPrecomputed);
  save_ground_truth(data.truth, ctx.paths.truth);
  record_stage(ctx.man, ctx.paths, stage, cfg,
               {ctx.paths.dataset, ctx.paths.truth});
  std::printf("[generate] wrote %s (%zu trajectories)\n",
              ctx.paths.dataset.c_str(), data.dataset.size());
}

void do_train(const ExperimentConfig& cfg, Ctx& ctx,
              const StageOptions& opts) {
  std::unique_ptr<LoadedData> data;
  for (Method method : cfg.methods) {
    const std::string tag = method_name(method);
    const std::string stage = "train:" + tag;
    if (!opts.force && stage_fresh(ctx.man, stage, cfg)) {
      std::printf("[train %s] up to date\n", tag.c_str());
      continue;
    }
    require_prereqs(ctx.man, stage, cfg);
    if (!data) data = std::make_unique<LoadedData>(load_splits(cfg, ctx.paths));

    TrainOptions topts;
    topts.method = method;
    topts.geli = cfg.geli;
    topts.train = cfg.reward_train;
    topts.init_seed = Rng::derive(cfg.geli.rng_seed, tag);
    const TrainResult res = train_reward(data->splits.datasets[0],
                                         data->splits.datasets[1], topts);

    CheckpointMeta meta;
    meta.kind = "reward_net";
    meta.epochs_done = res.epochs_done;
    save_checkpoint(ctx.paths.checkpoint(tag), res.net, res.opt, meta);

    std::string log;
    for (const auto& entry : res.curve) {
      json line;
      line["epoch"] = entry.epoch;
      line["train_loss"] = entry.train_loss;
      line["test_mse"] = entry.test_mse ? json(*entry.test_mse) : json(nullptr);
      log += line.dump();
      log += '\n';
    }
    write_text(ctx.paths.train_log(tag), log);

    record_stage(ctx.man, ctx.paths, stage, cfg,
                 {ctx.paths.checkpoint(tag), ctx.paths.train_log(tag)});
    const double final_loss =
        res.curve.empty() ? 0.0 : res.curve.back().train_loss;
    std::printf("[train %s] %llu epochs, final train loss %g\n", tag.c_str(),
                static_cast<unsigned long long>(res.epochs_done), final_loss);
  }
}

void do_eval(const ExperimentConfig& cfg, Ctx& ctx,
             const StageOptions& opts) {
  std::unique_ptr<LoadedData> data;
  const auto ensure_data = [&] {
    if (!data) data = std::make_unique<LoadedData>(load_splits(cfg, ctx.paths));
  };

  for (const BaselineKind kind : {BaselineKind::kMean, BaselineKind::kMode}) {
    const std::string tag = kind == BaselineKind::kMean ? "Mean" : "Mode";
    const std::string stage = "eval:" + tag;
    if (!opts.force && stage_fresh(ctx.man, stage, cfg)) {
      std::printf("[eval %s] up to date\n", tag.c_str());
      continue;
    }
    require_prereqs(ctx.man, stage, cfg);
    ensure_data();
    const ConstantBaseline baseline =
        fit_constant_baseline(data->splits.datasets[0], kind);
    const auto rewards =
        baseline_rewards(baseline, data->splits.datasets[1]);
    const EvalReport rep = make_eval_report(tag, rewards,
                                            data->splits.datasets[1],
                                            data->splits.truths[1]);
    write_text(ctx.paths.eval_json(tag), eval_report_json(rep, rewards));
    record_stage(ctx.man, ctx.paths, stage, cfg, {ctx.paths.eval_json(tag)});
    std::printf("[eval %s] mse %g\n", tag.c_str(), rep.decomposition.mse);
  }

  for (Method method : cfg.methods) {
    const std::string tag = method_name(method);
    const std::string stage = "eval:" + tag;
    if (!opts.force && stage_fresh(ctx.man, stage, cfg)) {
      std::printf("[eval %s] up to date\n", tag.c_str());
      continue;
    }
    require_prereqs(ctx.man, stage, cfg);
    ensure_data();
    const Checkpoint ckpt = load_checkpoint(ctx.paths.checkpoint(tag));
    if (ckpt.meta.kind != "reward_net")
      throw ArtifactError("checkpoint '" + ctx.paths.checkpoint(tag) +
                          "' is a '" + ckpt.meta.kind +
                          "', not a reward net");
    const auto rewards =
        method_step_rewards(ckpt.net, method, data->splits.datasets[1]);
    const EvalReport rep = make_eval_report(tag, rewards,
                                            data->splits.datasets[1],
                                            data->splits.truths[1]);
    write_text(ctx.paths.eval_json(tag), eval_report_json(rep, rewards));
    record_stage(ctx.man, ctx.paths, stage, cfg, {ctx.paths.eval_json(tag)});
    std::printf("[eval %s] mse %g, delta %g\n", tag.c_str(),
                rep.decomposition.mse, rep.delta_li.delta);
  }
}

void do_adapt(const ExperimentConfig& cfg, Ctx& ctx,
              const StageOptions& opts) {
  const std::string stage = "adapt";
  if (!opts.force && stage_fresh(ctx.man, stage, cfg)) {
    std::printf("[adapt] up to date\n");
    return;
  }
  require_prereqs(ctx.man, stage, cfg);
  const LoadedData data = load_splits(cfg, ctx.paths);

  const Checkpoint ckpt =
      load_checkpoint(ctx.paths.checkpoint("GELI_RRD_VA"));
  if (ckpt.meta.kind != "reward_net")
    throw ArtifactError("checkpoint '" + ctx.paths.checkpoint("GELI_RRD_VA") +
                        "' is a '" + ckpt.meta.kind + "', not a reward net");

  const ActionVocab vocab = make_action_vocab(cfg.env, cfg.ppo.num_actions);
  std::vector<std::vector<double>> pool;
  for (const auto& traj : data.splits.datasets[2].trajectories)
    for (const auto& step : traj.steps) pool.push_back(step.state_features);

  const AdaptResult res = run_ppo_adaptation(ckpt.net, vocab, pool,
                                             cfg.ppo.ppo, cfg.ppo.iterations);

  const auto episodes = make_eval_episodes(cfg.env, cfg.ppo.eval_episodes);
  const std::uint64_t eval_seed = Rng::derive(cfg.ppo.ppo.seed, "adapt_eval");
  const PolicyEvalResult before =
      evaluate_policy(res.reference.params, vocab, episodes, eval_seed);
  const PolicyEvalResult after =
      evaluate_policy(res.policy, vocab, episodes, eval_seed);

  RewardNet policy_net;
  policy_net.params.weights = {res.policy.w};
  policy_net.params.biases = {std::vector<double>(res.policy.w.rows, 0.0)};
  CheckpointMeta meta;
  meta.kind = "policy";
  meta.epochs_done = cfg.ppo.iterations;
  save_checkpoint(ctx.paths.checkpoint("policy"), policy_net, res.opt, meta);

  std::string log;
  for (const auto& entry : res.curve) {
    json line;
    line["iteration"] = entry.iteration;
    line["mean_shaped_reward"] = entry.mean_shaped_reward;
    line["mean_true_reward"] = entry.mean_true_reward;
    line["kl"] = entry.kl;
    line["clip_fraction"] = entry.clip_fraction;
    log += line.dump();
    log += '\n';
  }
  const std::string log_path = ctx.paths.log_dir + "/adapt.jsonl";
  write_text(log_path, log);

  json summary;
  summary["reference_mean_return"] = before.mean_return;
  summary["reference_std_error"] = before.std_error;
  summary["adapted_mean_return"] = after.mean_return;
  summary["adapted_std_error"] = after.std_error;
  summary["improvement"] = after.mean_return - before.mean_return;
  const std::string summary_path = ctx.paths.eval_json("policy");
  write_text(summary_path, summary.dump(2) + "\n");

  record_stage(ctx.man, ctx.paths, stage, cfg,
               {ctx.paths.checkpoint("policy"), log_path, summary_path});
  std::printf("[adapt] return %g -> %g over %zu iterations\n",
              before.mean_return, after.mean_return, cfg.ppo.iterations);
}

void do_report(const ExperimentConfig& cfg, Ctx& ctx,
               const StageOptions& opts) {
  const std::string stage = "report";
  if (!opts.force && stage_fresh(ctx.man, stage, cfg)) {
    std::printf("[report] up to date\n");
    return;
  }

  std::vector<std::string> order = {"Mean", "Mode"};
  for (Method m : cfg.methods) order.push_back(method_name(m));

  std::vector<EvalReport> reports;
  std::vector<std::string> gaps;
  for (const auto& tag : order) {
    if (stage_fresh(ctx.man, "eval:" + tag, cfg)) {
      reports.push_back(eval_report_from_file(ctx.paths.eval_json(tag)));
    } else if (opts.partial) {
      gaps.push_back(tag);
    } else {
      throw ArtifactError("report: eval artifact for '" + tag +
                          "' is missing or stale; run eval-reward first or "
                          "pass --partial");
    }
  }
  if (reports.empty())
    throw ArtifactError("report: no eval artifacts under '" +
                        ctx.paths.eval_dir + "'");

  const std::string csv_path = ctx.paths.report_dir + "/report.csv";
  const std::string json_path = ctx.paths.report_dir + "/report.json";
  emit_report(reports, gaps, csv_path, json_path);
  record_stage(ctx.man, ctx.paths, stage, cfg, {csv_path, json_path});
  std::printf("[report] %zu rows, %zu gaps -> %s\n", reports.size(),
              gaps.size(), csv_path.c_str());
}

}  // namespace

RunPaths RunPaths::resolve(const ExperimentConfig& cfg) {
  RunPaths p;
  p.workdir = resolved_workdir(cfg);
  p.dataset = resolved_dataset_path(cfg);
  p.truth = (fs::path(p.dataset).parent_path() / "truth.jsonl").string();
  p.manifest = p.workdir + "/manifest.json";
  p.lock = p.workdir + "/.lock";
  p.checkpoint_dir = resolved_checkpoint_dir(cfg);
  p.report_dir = resolved_report_dir(cfg);
  p.log_dir = p.workdir + "/logs";
  p.eval_dir = p.workdir + "/eval";
  return p;
}

std::string RunPaths::checkpoint(const std::string& tag) const {
  return checkpoint_dir + "/" + tag + ".ckpt";
}

std::string RunPaths::train_log(const std::string& tag) const {
  return log_dir + "/train_" + tag + ".jsonl";
}

std::string RunPaths::eval_json(const std::string& tag) const {
  return eval_dir + "/" + tag + ".json";
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read '" + path + "' for hashing");
  std::ostringstream buf;
  buf << in.rdbuf();
  return to_hex(fnv1a64(buf.str()));
}

RunManifest RunManifest::load(const std::string& path) {
  RunManifest man;
  std::ifstream in(path, std::ios::binary);
  if (!in) return man;
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ArtifactError("manifest '" + path +
                        "' is not valid JSON: " + e.what());
  }
  try {
    if (j.contains("config"))
      for (const auto& [key, value] : j["config"].items())
        man.config[key] = value.get<std::string>();
    if (j.contains("stages")) {
      for (const auto& [name, s] : j["stages"].items()) {
        StageRecord rec;
        rec.fingerprint = s.value("fingerprint", "");
        rec.completed_at = s.value("completed_at", "");
        if (s.contains("outputs"))
          for (const auto& [p, h] : s["outputs"].items())
            rec.outputs[p] = h.get<std::string>();
        man.stages[name] = std::move(rec);
      }
    }
  } catch (const json::exception& e) {
    throw ArtifactError("manifest '" + path +
                        "' has an unexpected shape: " + e.what());
  }
  return man;
}

void RunManifest::save(const std::string& path) const {
  json j;
  j["format"] = 1;
  j["config"] = config;
  json stages_j = json::object();
  for (const auto& [name, rec] : stages) {
    json s;
    s["fingerprint"] = rec.fingerprint;
    s["completed_at"] = rec.completed_at;
    s["outputs"] = rec.outputs;
    stages_j[name] = std::move(s);
  }
  j["stages"] = std::move(stages_j);

  const std::string tmp = path + ".tmp";
  write_text(tmp, j.dump(2) + "\n");
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw ArtifactError("cannot replace manifest '" + path +
                        "': " + ec.message());
}

void cmd_generate(const ExperimentConfig& cfg, const StageOptions& opts) {
  Ctx ctx = open_ctx(cfg);
  do_generate(cfg, ctx, opts);
}

void cmd_train_reward(const ExperimentConfig& cfg, const StageOptions& opts) {
  Ctx ctx = open_ctx(cfg);
  do_train(cfg, ctx, opts);
}

void cmd_eval_reward(const ExperimentConfig& cfg, const StageOptions& opts) {
  Ctx ctx = open_ctx(cfg);
  do_eval(cfg, ctx, opts);
}

void cmd_adapt_policy(const ExperimentConfig& cfg, const StageOptions& opts) {
  Ctx ctx = open_ctx(cfg);
  do_adapt(cfg, ctx, opts);
}

void cmd_report(const ExperimentConfig& cfg, const StageOptions& opts) {
  Ctx ctx = open_ctx(cfg);
  do_report(cfg, ctx, opts);
}

void run_all(const ExperimentConfig& cfg, const StageOptions& opts) {
  Ctx ctx = open_ctx(cfg);
  do_generate(cfg, ctx, opts);
  do_train(cfg, ctx, opts);
  do_eval(cfg, ctx, opts);
  bool has_geli = false;
  for (Method m : cfg.methods)
    if (m == Method::kGeliRrdVa) has_geli = true;
  if (has_geli)
    do_adapt(cfg, ctx, opts);
  else
    std::printf("[adapt] skipped (GELI_RRD_VA not in methods)\n");
  do_report(cfg, ctx, opts);
}

}  // namespace geli
