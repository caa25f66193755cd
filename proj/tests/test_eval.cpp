#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "geli/errors.hpp"
#include "geli/eval.hpp"
#include "geli/rng.hpp"
#include "geli/traj.hpp"

namespace fs = std::filesystem;
using namespace geli;

namespace {

Trajectory make_traj(double global_return, std::size_t horizon) {
  Trajectory traj;
  traj.global_return = global_return;
  for (std::size_t t = 0; t < horizon; ++t) {
    Step s;
    s.state_features = {0.0};
    s.action_features = {0.0};
    traj.steps.push_back(std::move(s));
  }
  return traj;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct FileGuard {
  fs::path path;
  explicit FileGuard(fs::path p) : path(std::move(p)) {}
  ~FileGuard() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

EvalReport sample_report(const std::string& tag) {
  EvalReport r;
  r.method_tag = tag;
  r.decomposition.mse = 172.246;
  r.decomposition.mae = 9.5;
  r.delta_li.mean_reward_positive = 0.75;
  r.delta_li.mean_reward_nonpositive = 0.25;
  r.delta_li.delta = 0.5;
  OracleReport oracle;
  oracle.pearson_r = 0.875;
  oracle.aligned_mse = 0.0625;
  oracle.sign_agreement = 0.9;
  r.oracle = oracle;
  return r;
}

}  // namespace

TEST_CASE("eval_decomposition on residuals +2 and -2") {
  Dataset ds;
  ds.trajectories.push_back(make_traj(5.0, 2));
  ds.trajectories.push_back(make_traj(1.0, 2));
  const std::vector<std::vector<double>> rewards = {{1.0, 2.0}, {1.5, 1.5}};
  const auto stats = eval_decomposition(rewards, ds);
  CHECK(stats.mse == doctest::Approx(4.0));
  CHECK(stats.mae == doctest::Approx(2.0));
}

TEST_CASE("eval_decomposition is invariant to trajectory order") {
  Dataset ds;
  std::vector<std::vector<double>> rewards;
  Rng rng(3);
  for (int i = 0; i < 8; ++i) {
    ds.trajectories.push_back(make_traj(rng.normal() * 3.0, 4));
    rewards.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
  }
  const auto base = eval_decomposition(rewards, ds);

  Dataset reversed;
  std::vector<std::vector<double>> rev_rewards;
  for (int i = 7; i >= 0; --i) {
    reversed.trajectories.push_back(ds.trajectories[static_cast<std::size_t>(i)]);
    rev_rewards.push_back(rewards[static_cast<std::size_t>(i)]);
  }
  const auto perm = eval_decomposition(rev_rewards, reversed);
  CHECK(perm.mse == doctest::Approx(base.mse).epsilon(1e-12));
  CHECK(perm.mae == doctest::Approx(base.mae).epsilon(1e-12));
}

TEST_CASE("eval_decomposition validates alignment") {
  Dataset ds;
  ds.trajectories.push_back(make_traj(1.0, 2));
  const std::vector<std::vector<double>> short_rewards = {{1.0}};
  CHECK_THROWS_AS(eval_decomposition(short_rewards, ds), DataError);
  const std::vector<std::vector<double>> no_rewards;
  CHECK_THROWS_AS(eval_decomposition(no_rewards, Dataset{}), DataError);
}

TEST_CASE("eval_delta_li splits mean rewards by label class") {
  Dataset ds;
  auto traj = make_traj(0.0, 4);
  traj.steps[0].mm_label = 1;
  traj.steps[1].mm_label = 1;
  traj.steps[2].mm_label = 0;
  // Step 3 stays unlabeled and must be skipped.
  ds.trajectories.push_back(traj);
  const std::vector<std::vector<double>> rewards = {{0.8, 0.8, 0.3, 99.0}};

  const auto stats = eval_delta_li(rewards, ds);
  CHECK(stats.mean_reward_positive == doctest::Approx(0.8));
  CHECK(stats.mean_reward_nonpositive == doctest::Approx(0.3));
  CHECK(stats.delta == doctest::Approx(0.5));
}

TEST_CASE("eval_delta_li requires both label classes") {
  Dataset ds;
  auto traj = make_traj(0.0, 2);
  traj.steps[0].mm_label = 1;
  traj.steps[1].mm_label = 1;
  ds.trajectories.push_back(traj);
  try {
    eval_delta_li({{0.5, 0.5}}, ds);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("non-positive") != std::string::npos);
  }
}

TEST_CASE("the mean baseline averages per-step returns") {
  Dataset ds;
  ds.trajectories.push_back(make_traj(10.0, 5));
  ds.trajectories.push_back(make_traj(20.0, 5));
  const auto baseline = fit_constant_baseline(ds, BaselineKind::kMean);
  CHECK(baseline.per_step_value == doctest::Approx(3.0));

  const auto rewards = baseline_rewards(baseline, ds);
  REQUIRE(rewards.size() == 2);
  for (const auto& row : rewards) {
    REQUIRE(row.size() == 5);
    for (double v : row) CHECK(v == doctest::Approx(3.0));
  }
}

TEST_CASE("both baselines agree when every return is identical") {
  Dataset ds;
  for (int i = 0; i < 6; ++i) ds.trajectories.push_back(make_traj(8.0, 4));
  CHECK(fit_constant_baseline(ds, BaselineKind::kMean).per_step_value ==
        doctest::Approx(2.0));
  CHECK(fit_constant_baseline(ds, BaselineKind::kMode).per_step_value ==
        doctest::Approx(2.0));
}

TEST_CASE("the mode baseline picks the most frequent snapped return") {
  Dataset ds;
  ds.trajectories.push_back(make_traj(1.0, 1));
  ds.trajectories.push_back(make_traj(1.0, 1));
  ds.trajectories.push_back(make_traj(1.0, 1));
  ds.trajectories.push_back(make_traj(5.0, 1));
  const auto baseline = fit_constant_baseline(ds, BaselineKind::kMode);
  CHECK(baseline.per_step_value == doctest::Approx(1.0));
}

TEST_CASE("the mean baseline attains the population variance of returns") {
  // With a shared horizon the mean baseline's decomposition MSE is exactly
  // the population variance of the returns; check against brute force.
  Dataset ds;
  Rng rng(9);
  std::vector<double> returns;
  for (int i = 0; i < 12; ++i) {
    const double r = rng.normal() * 2.0 + 1.0;
    returns.push_back(r);
    ds.trajectories.push_back(make_traj(r, 3));
  }
  const auto baseline = fit_constant_baseline(ds, BaselineKind::kMean);
  const auto stats = eval_decomposition(baseline_rewards(baseline, ds), ds);

  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  var /= static_cast<double>(returns.size());
  CHECK(stats.mse == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("fit_constant_baseline rejects an empty dataset") {
  CHECK_THROWS_AS(fit_constant_baseline(Dataset{}, BaselineKind::kMean),
                  DataError);
}

TEST_CASE("the CSV report renders values in shortest round-trip form") {
  const auto csv = render_report_csv({sample_report("GELI_RRD_VA")}, {});
  CHECK(csv.find("method_tag,l_ge_mse,l_ge_mae,mean_r_pos,mean_r_nonpos,"
                 "delta_r_li,oracle_pearson,oracle_mse,oracle_sign_agreement\n") == 0);
  CHECK(csv.find("GELI_RRD_VA,172.246,9.5,0.75,0.25,0.5,0.875,0.0625,0.9\n") !=
        std::string::npos);
}

TEST_CASE("reports without oracle stats leave those cells empty") {
  auto report = sample_report("Mean");
  report.oracle.reset();
  const auto csv = render_report_csv({report}, {});
  CHECK(csv.find("Mean,172.246,9.5,0.75,0.25,0.5,,,\n") != std::string::npos);
}

TEST_CASE("gap rows carry only the method tag") {
  const auto csv = render_report_csv({sample_report("GE_RRD")}, {"GE_RUDDER"});
  CHECK(csv.find("GE_RUDDER,,,,,,,,\n") != std::string::npos);
}

TEST_CASE("emit_report writes byte-identical files across runs") {
  const auto dir = fs::temp_directory_path();
  const auto csv1 = dir / "geli_eval_report1.csv";
  const auto json1 = dir / "geli_eval_report1.json";
  const auto csv2 = dir / "geli_eval_report2.csv";
  const auto json2 = dir / "geli_eval_report2.json";
  FileGuard g1(csv1), g2(json1), g3(csv2), g4(json2);

  const std::vector<EvalReport> reports = {sample_report("GE_RRD"),
                                           sample_report("LI_ONLY")};
  emit_report(reports, {"GELI_RRD_VA"}, csv1.string(), json1.string());
  emit_report(reports, {"GELI_RRD_VA"}, csv2.string(), json2.string());

  const auto csv_bytes = read_file(csv1);
  CHECK(csv_bytes == read_file(csv2));
  CHECK(read_file(json1) == read_file(json2));
  CHECK(csv_bytes == render_report_csv(reports, {"GELI_RRD_VA"}));

  // The JSON mirror parses back and agrees with the CSV on values.
  const auto rows = nlohmann::json::parse(read_file(json1));
  REQUIRE(rows.is_array());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["method_tag"] == "GE_RRD");
  CHECK(rows[0]["l_ge_mse"].get<double>() == 172.246);
  CHECK(rows[2]["method_tag"] == "GELI_RRD_VA");
  CHECK(rows[2]["l_ge_mse"].is_null());
  CHECK(rows[2]["oracle_pearson"].is_null());
}

TEST_CASE("emit_report refuses an empty table") {
  CHECK_THROWS_AS(emit_report({}, {}, "/tmp/geli_none.csv", "/tmp/geli_none.json"),
                  DataError);
}
