#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fgexpo/akl.hpp"
#include "fgexpo/core.hpp"
#include "fgexpo/estimators.hpp"
#include "fgexpo/gcs.hpp"
#include "fgexpo/testbed.hpp"

namespace fgexpo {

struct StepRecord {
  long step = 0;
  /// Batch questions in processing order (ascending id).
  std::vector<QuestionId> sampled;
  BatchAccuracy batch_accuracy;
  double beta_eff = 0.0;
  ObjectiveBreakdown objective;
  double mean_abs_advantage = 0.0;
  /// Empirical pass rate of each sampled question, aligned with `sampled`.
  std::vector<double> pass_rates;
  double duration_seconds = 0.0;
};

struct RunResult {
  PolicyParams final_params;
  std::vector<StepRecord> steps;
  PassRateTable final_table;
};

/// Everything the loop saw at one step, for trace writers and tests.
struct StepTrace {
  const StepRecord& record;
  const CurriculumWeights& weights;  // used to draw this step's batch
  const PassRateTable& table_after;
  std::span<const GroupResult> groups;
};

using StepObserver = std::function<void(const StepTrace&)>;

/// Runs the FG-ExPO loop for cfg.total_steps steps. The GRPO baseline is
/// the same loop with a constant-1 scale and the uniform sampler.
///
/// Per step: draw a batch from the current table's weights; roll out and
/// score G samples per question with the pre-update policy; EMA-update the
/// table; pool accuracy; set beta_eff; take one gradient-ascent step on the
/// clipped surrogate minus beta_eff * K3. The reference policy is `init`.
RunResult train(const TrainConfig& cfg, const QuestionBank& bank, const PolicyParams& init,
                const StepObserver& observer = {});

struct AblationRuns {
  RunResult grpo;      // constant rho = 1, uniform sampler
  RunResult akl_only;  // tanh rho, uniform sampler (w/o GCS)
  RunResult gcs_only;  // constant rho = 1, Gaussian sampler (w/o AKL)
  RunResult full;      // tanh rho, Gaussian sampler
};

/// The four ablation configurations derived from cfg; everything but the
/// two selectors is shared, including the seed.
struct AblationConfigs {
  TrainConfig grpo, akl_only, gcs_only, full;
};
AblationConfigs ablation_configs(const TrainConfig& cfg);

AblationRuns ablation_matrix(const TrainConfig& cfg, const QuestionBank& bank,
                             const PolicyParams& init);

/// True when the two records agree on everything except wall-clock time.
bool same_trajectory_step(const StepRecord& a, const StepRecord& b);

}  // namespace fgexpo
