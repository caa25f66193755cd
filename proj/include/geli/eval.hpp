#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geli/reward_net.hpp"
#include "geli/synth.hpp"
#include "geli/traj.hpp"

namespace geli {

struct DecompositionStats {
  double mse = 0.0;  // mean over trajectories of (R - sum r)^2
  double mae = 0.0;  // mean over trajectories of |R - sum r|
};

struct DeltaLiStats {
  double mean_reward_positive = 0.0;
  double mean_reward_nonpositive = 0.0;
  double delta = 0.0;  // positive-class mean minus non-positive-class mean
};

/// Everything reported for one trained method on one evaluation split.
struct EvalReport {
  std::string method_tag;
  DecompositionStats decomposition;
  DeltaLiStats delta_li;
  std::optional<OracleReport> oracle;
};

DecompositionStats eval_decomposition(
    const std::vector<std::vector<double>>& rewards, const Dataset& dataset);
DecompositionStats eval_decomposition(const RewardNet& net,
                                      const Dataset& dataset);

/// Mean predicted reward on positively vs non-positively labeled steps.
/// Unlabeled steps are skipped; an evaluation split where either class is
/// absent is an error naming the missing class.
DeltaLiStats eval_delta_li(const std::vector<std::vector<double>>& rewards,
                           const Dataset& dataset);
DeltaLiStats eval_delta_li(const RewardNet& net, const Dataset& dataset);

enum class BaselineKind { kMean, kMode };

struct ConstantBaseline {
  BaselineKind kind = BaselineKind::kMean;
  double per_step_value = 0.0;
};

/// Constant per-step reward baselines. Mean: average over trajectories of
/// R/T. Mode: the most frequent return after snapping returns to a grid of
/// 20 equal bins over their range (ties resolve to the smaller value, and a
/// degenerate range means every return is the mode), divided by the mean
/// horizon.
ConstantBaseline fit_constant_baseline(const Dataset& dataset,
                                       BaselineKind kind);

/// The baseline expanded to per-step rewards over a dataset.
std::vector<std::vector<double>> baseline_rewards(
    const ConstantBaseline& baseline, const Dataset& dataset);

/// Writes one comparison table as CSV plus a JSON mirror. Rows keep their
/// caller order; `gap_tags` append rows whose metric cells are empty (CSV)
/// or null (JSON) for methods that were expected but not evaluated. Output
/// bytes depend only on the inputs.
void emit_report(const std::vector<EvalReport>& reports,
                 const std::vector<std::string>& gap_tags,
                 const std::string& csv_path, const std::string& json_path);

/// The CSV bytes emit_report would write (exposed for format tests).
std::string render_report_csv(const std::vector<EvalReport>& reports,
                              const std::vector<std::string>& gap_tags);

}  // namespace geli
