#include "fgexpo/eval.hpp"

#include <algorithm>
#include <stdexcept>

namespace fgexpo {

EvalReport make_report(std::vector<QuestionId> ids, std::vector<std::vector<int>> rewards,
                       double temperature) {
  if (ids.size() != rewards.size()) throw std::invalid_argument("ids and reward rows differ in count");
  if (ids.empty()) throw std::invalid_argument("empty evaluation");
  const std::size_t k = rewards.front().size();
  if (k == 0) throw std::invalid_argument("k must be positive");

  EvalReport r;
  r.k = static_cast<int>(k);
  r.temperature = temperature;
  r.question_ids = std::move(ids);
  r.rewards = std::move(rewards);
  r.pass1.reserve(r.rewards.size());
  r.passk.reserve(r.rewards.size());
  for (const auto& row : r.rewards) {
    if (row.size() != k) throw std::invalid_argument("every question needs exactly k rewards");
    long s = 0;
    for (int x : row) {
      require_binary_reward(x);
      s += x;
    }
    r.pass1.push_back(static_cast<double>(s) / static_cast<double>(k));
    r.passk.push_back(s > 0 ? 1.0 : 0.0);
  }
  double s1 = 0.0, sk = 0.0;
  for (std::size_t i = 0; i < r.pass1.size(); ++i) {
    s1 += r.pass1[i];
    sk += r.passk[i];
  }
  r.mean_pass1 = s1 / static_cast<double>(r.pass1.size());
  r.mean_passk = sk / static_cast<double>(r.passk.size());
  return r;
}

EvalReport evaluate(const PolicyParams& params, const QuestionBank& bank, int k,
                    double temperature, const RandomStream& rng) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  const PolicyParams policy = params.with_temperature(temperature);
  policy.check_compatible(bank);

  std::vector<QuestionId> ids;
  std::vector<std::vector<int>> rewards;
  ids.reserve(bank.size());
  rewards.reserve(bank.size());
  for (const auto& q : bank.questions()) {
    RandomStream qrng = rng.derive("eval-question", q.id);
    std::vector<int> row;
    row.reserve(static_cast<std::size_t>(k));
    for (const auto& rollout : sample_rollouts(policy, q, k, qrng)) row.push_back(rollout.reward());
    ids.push_back(q.id);
    rewards.push_back(std::move(row));
  }
  return make_report(std::move(ids), std::move(rewards), temperature);
}

double exploration_gap(const EvalReport& report) {
  return std::max(0.0, report.mean_passk - report.mean_pass1);
}

int pass_at_prefix(std::span<const int> rewards, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > rewards.size())
    throw std::invalid_argument("prefix length out of range");
  return std::any_of(rewards.begin(), rewards.begin() + k, [](int r) { return r == 1; }) ? 1 : 0;
}

}  // namespace fgexpo
