#include "geli/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"

#include "geli/errors.hpp"

namespace geli {
namespace {

using nlohmann::json;

void check_alignment(const std::vector<std::vector<double>>& rewards,
                     const Dataset& dataset) {
  if (rewards.size() != dataset.size())
    throw DataError("eval: rewards do not match dataset trajectory count");
  for (std::size_t i = 0; i < rewards.size(); ++i)
    if (rewards[i].size() != dataset.trajectories[i].steps.size())
      throw DataError("eval: rewards do not match step count of trajectory " +
                      std::to_string(i));
}

// Shortest round-trip decimal form, matching the JSON mirror so the two
// report files always agree on values.
std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

DecompositionStats eval_decomposition(
    const std::vector<std::vector<double>>& rewards, const Dataset& dataset) {
  check_alignment(rewards, dataset);
  if (dataset.size() == 0) throw DataError("eval_decomposition: empty dataset");

  DecompositionStats stats;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    double sum = 0.0;
    for (double r : rewards[i]) sum += r;
    const double resid = dataset.trajectories[i].global_return - sum;
    stats.mse += resid * resid;
    stats.mae += std::abs(resid);
  }
  const auto n = static_cast<double>(dataset.size());
  stats.mse /= n;
  stats.mae /= n;
  return stats;
}

DecompositionStats eval_decomposition(const RewardNet& net,
                                      const Dataset& dataset) {
  return eval_decomposition(per_step_rewards(net, dataset), dataset);
}

DeltaLiStats eval_delta_li(const std::vector<std::vector<double>>& rewards,
                           const Dataset& dataset) {
  check_alignment(rewards, dataset);
  double sum_pos = 0.0, sum_non = 0.0;
  std::size_t n_pos = 0, n_non = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& steps = dataset.trajectories[i].steps;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      if (!steps[t].mm_label) continue;
      if (*steps[t].mm_label == 1) {
        sum_pos += rewards[i][t];
        ++n_pos;
      } else {
        sum_non += rewards[i][t];
        ++n_non;
      }
    }
  }
  if (n_pos == 0) throw DataError("eval_delta_li: no positive-labeled steps");
  if (n_non == 0) throw DataError("eval_delta_li: no non-positive-labeled steps");

  DeltaLiStats stats;
  stats.mean_reward_positive = sum_pos / static_cast<double>(n_pos);
  stats.mean_reward_nonpositive = sum_non / static_cast<double>(n_non);
  stats.delta = stats.mean_reward_positive - stats.mean_reward_nonpositive;
  return stats;
}

DeltaLiStats eval_delta_li(const RewardNet& net, const Dataset& dataset) {
  return eval_delta_li(per_step_rewards(net, dataset), dataset);
}

ConstantBaseline fit_constant_baseline(const Dataset& dataset,
                                       BaselineKind kind) {
  if (dataset.size() == 0) throw DataError("fit_constant_baseline: empty dataset");

  ConstantBaseline baseline;
  baseline.kind = kind;
  if (kind == BaselineKind::kMean) {
    double acc = 0.0;
    for (const auto& traj : dataset.trajectories)
      acc += traj.global_return / static_cast<double>(traj.steps.size());
    baseline.per_step_value = acc / static_cast<double>(dataset.size());
    return baseline;
  }

  // Mode: snap returns to a 20-bin grid over their range and take the most
  // frequent snapped value; a degenerate range leaves one shared value.
  double lo = dataset.trajectories.front().global_return;
  double hi = lo;
  double mean_horizon = 0.0;
  for (const auto& traj : dataset.trajectories) {
    lo = std::min(lo, traj.global_return);
    hi = std::max(hi, traj.global_return);
    mean_horizon += static_cast<double>(traj.steps.size());
  }
  mean_horizon /= static_cast<double>(dataset.size());

  double mode_value = lo;
  if (hi - lo > 1e-12) {
    const double step = (hi - lo) / 20.0;
    std::map<long long, std::size_t> counts;
    for (const auto& traj : dataset.trajectories) {
      const auto bin =
          static_cast<long long>(std::llround((traj.global_return - lo) / step));
      counts[bin] += 1;
    }
    std::size_t best = 0;
    long long best_bin = 0;
    for (const auto& [bin, count] : counts) {
      if (count > best) {  // map order makes ties resolve to the smaller bin
        best = count;
        best_bin = bin;
      }
    }
    mode_value = lo + static_cast<double>(best_bin) * step;
  }
  baseline.per_step_value = mode_value / mean_horizon;
  return baseline;
}

std::vector<std::vector<double>> baseline_rewards(
    const ConstantBaseline& baseline, const Dataset& dataset) {
  std::vector<std::vector<double>> rewards;
  rewards.reserve(dataset.size());
  for (const auto& traj : dataset.trajectories)
    rewards.emplace_back(traj.steps.size(), baseline.per_step_value);
  return rewards;
}

namespace {

const char* kColumns[] = {"method_tag",    "l_ge_mse",   "l_ge_mae",
                          "mean_r_pos",    "mean_r_nonpos", "delta_r_li",
                          "oracle_pearson", "oracle_mse", "oracle_sign_agreement"};

json report_row_json(const EvalReport& r) {
  json row;
  row["method_tag"] = r.method_tag;
  row["l_ge_mse"] = r.decomposition.mse;
  row["l_ge_mae"] = r.decomposition.mae;
  row["mean_r_pos"] = r.delta_li.mean_reward_positive;
  row["mean_r_nonpos"] = r.delta_li.mean_reward_nonpositive;
  row["delta_r_li"] = r.delta_li.delta;
  row["oracle_pearson"] = r.oracle ? json(r.oracle->pearson_r) : json(nullptr);
  row["oracle_mse"] = r.oracle ? json(r.oracle->aligned_mse) : json(nullptr);
  row["oracle_sign_agreement"] =
      r.oracle ? json(r.oracle->sign_agreement) : json(nullptr);
  return row;
}

json gap_row_json(const std::string& tag) {
  json row;
  for (const char* col : kColumns) row[col] = nullptr;
  row["method_tag"] = tag;
  return row;
}

}  // namespace

std::string render_report_csv(const std::vector<EvalReport>& reports,
                              const std::vector<std::string>& gap_tags) {
  std::string out;
  for (std::size_t c = 0; c < std::size(kColumns); ++c) {
    if (c) out += ',';
    out += kColumns[c];
  }
  out += '\n';
  for (const auto& r : reports) {
    out += r.method_tag;
    out += ',' + format_double(r.decomposition.mse);
    out += ',' + format_double(r.decomposition.mae);
    out += ',' + format_double(r.delta_li.mean_reward_positive);
    out += ',' + format_double(r.delta_li.mean_reward_nonpositive);
    out += ',' + format_double(r.delta_li.delta);
    if (r.oracle) {
      out += ',' + format_double(r.oracle->pearson_r);
      out += ',' + format_double(r.oracle->aligned_mse);
      out += ',' + format_double(r.oracle->sign_agreement);
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  for (const auto& tag : gap_tags) {
    out += tag;
    out.append(std::size(kColumns) - 1, ',');
    out += '\n';
  }
  return out;
}

void emit_report(const std::vector<EvalReport>& reports,
                 const std::vector<std::string>& gap_tags,
                 const std::string& csv_path, const std::string& json_path) {
  if (reports.empty() && gap_tags.empty())
    throw DataError("emit_report: nothing to report");

  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw ArtifactError("cannot write report: " + csv_path);
  csv << render_report_csv(reports, gap_tags);
  if (!csv) throw ArtifactError("report write failed: " + csv_path);

  json rows = json::array();
  for (const auto& r : reports) rows.push_back(report_row_json(r));
  for (const auto& tag : gap_tags) rows.push_back(gap_row_json(tag));
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw ArtifactError("cannot write report: " + json_path);
  js << rows.dump(2) << '\n';
  if (!js) throw ArtifactError("report write failed: " + json_path);
}

}  // namespace geli
