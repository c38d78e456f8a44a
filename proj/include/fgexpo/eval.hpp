#pragma once

#include <span>
#include <vector>

#include "fgexpo/core.hpp"
#include "fgexpo/rng.hpp"
#include "fgexpo/testbed.hpp"

namespace fgexpo {

/// pass@1 and pass@k from one shared k-sample budget per question.
struct EvalReport {
  int k = 0;
  double temperature = 0.0;
  std::vector<QuestionId> question_ids;
  std::vector<std::vector<int>> rewards;  // k rewards per question
  std::vector<double> pass1;
  std::vector<double> passk;
  double mean_pass1 = 0.0;
  double mean_passk = 0.0;
};

/// Builds a report from already-scored samples; every row must hold k rewards.
EvalReport make_report(std::vector<QuestionId> ids, std::vector<std::vector<int>> rewards,
                       double temperature);

/// k independent rollouts per question at `temperature`. Question q draws
/// from rng.derive("eval-question", id), so reports do not depend on bank
/// order or on any training stream.
EvalReport evaluate(const PolicyParams& params, const QuestionBank& bank, int k,
                    double temperature, const RandomStream& rng);

/// mean pass@k - mean pass@1.
double exploration_gap(const EvalReport& report);

/// Any-success indicator over the first k rewards.
int pass_at_prefix(std::span<const int> rewards, int k);

}  // namespace fgexpo
