#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "geli/config.hpp"
#include "geli/errors.hpp"
#include "geli/pipeline.hpp"

namespace {

struct Args {
  std::string config;
  std::uint64_t seed = 0;
  bool force = false;
  bool partial = false;
  bool seed_given = false;
};

geli::ExperimentConfig load(const Args& args) {
  geli::ExperimentConfig cfg = geli::load_config(args.config);
  if (args.seed_given) geli::override_all_seeds(cfg, args.seed);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GELI: session-return decomposition, proxy shaping, and "
               "policy adaptation"};
  app.require_subcommand(1);

  Args args;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "experiment config file")
        ->required();
    sub->add_option("--seed", args.seed,
                    "override every seed in the config")
        ->each([&](const std::string&) { args.seed_given = true; });
    sub->add_flag("--force", args.force, "redo the stage even if complete");
  };

  const auto stage_opts = [&args] {
    geli::StageOptions opts;
    opts.force = args.force;
    opts.partial = args.partial;
    return opts;
  };

  auto* generate = app.add_subcommand("generate", "write the synthetic dataset");
  add_common(generate);
  generate->callback([&] { geli::cmd_generate(load(args), stage_opts()); });

  auto* train = app.add_subcommand("train-reward",
                                   "train reward nets for the configured methods");
  add_common(train);
  train->callback([&] { geli::cmd_train_reward(load(args), stage_opts()); });

  auto* eval = app.add_subcommand("eval-reward",
                                  "evaluate trained nets and baselines");
  add_common(eval);
  eval->callback([&] { geli::cmd_eval_reward(load(args), stage_opts()); });

  auto* adapt = app.add_subcommand("adapt-policy",
                                   "run policy optimization against the "
                                   "trained reward");
  add_common(adapt);
  adapt->callback([&] { geli::cmd_adapt_policy(load(args), stage_opts()); });

  auto* report = app.add_subcommand("report", "emit the comparison table");
  add_common(report);
  report->add_flag("--partial", args.partial,
                   "emit gap rows for unevaluated methods");
  report->callback([&] { geli::cmd_report(load(args), stage_opts()); });

  auto* all = app.add_subcommand("run-all", "run every stage in order");
  add_common(all);
  all->add_flag("--partial", args.partial,
                "emit gap rows for unevaluated methods");
  all->callback([&] { geli::run_all(load(args), stage_opts()); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const geli::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const geli::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const geli::ArtifactError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const geli::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
