#include "fgexpo/core.hpp"

#include <cmath>
#include <sstream>

namespace fgexpo {

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

TrainConfig validate_config(TrainConfig cfg) {
  std::vector<std::string> errs;
  auto fail = [&errs](std::string field, std::string why) {
    errs.push_back(std::move(field) + ": " + std::move(why));
  };

  if (cfg.group_size < 2) fail("group_size", "must be >= 2");
  if (cfg.batch_size < 1) fail("batch_size", "must be positive");
  if (!(std::isfinite(cfg.base_kl_coeff) && cfg.base_kl_coeff >= 0.0))
    fail("base_kl_coeff", "must be finite and non-negative");
  if (!(cfg.clip_threshold > 0.0 && cfg.clip_threshold < 1.0))
    fail("clip_threshold", "must lie in (0,1)");
  if (!(cfg.ema_factor >= 0.0 && cfg.ema_factor < 1.0))
    fail("ema_factor", "must lie in [0,1)");
  if (!(cfg.curriculum_mean >= 0.0 && cfg.curriculum_mean <= 1.0))
    fail("curriculum_mean", "must lie in [0,1]");
  if (!finite_positive(cfg.curriculum_std)) fail("curriculum_std", "must be positive");
  if (!finite_positive(cfg.adv_eps)) fail("adv_eps", "must be positive");
  // A zero rate is allowed: it isolates the bookkeeping from optimization.
  if (!(std::isfinite(cfg.learning_rate) && cfg.learning_rate >= 0.0))
    fail("learning_rate", "must be finite and non-negative");
  if (cfg.total_steps < 0) fail("total_steps", "must be non-negative");
  if (cfg.rho_variant.kind == RhoKind::kConstant &&
      !finite_positive(cfg.rho_variant.constant))
    fail("rho_variant", "constant must be positive and finite");
  if (!finite_positive(cfg.sampling_temperature))
    fail("sampling_temperature", "must be positive");

  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid TrainConfig:";
    for (const auto& e : errs) os << "\n  " << e;
    throw ConfigError(os.str());
  }
  return cfg;
}

TrainConfig as_grpo_baseline(TrainConfig cfg) {
  cfg.rho_variant = RhoVariant::constant_value(1.0);
  cfg.sampler_variant = SamplerVariant::kUniform;
  return cfg;
}

bool is_grpo_baseline(const TrainConfig& cfg) {
  return cfg.rho_variant == RhoVariant::constant_value(1.0) &&
         cfg.sampler_variant == SamplerVariant::kUniform;
}

void require_binary_reward(int reward) {
  if (reward != 0 && reward != 1)
    throw std::invalid_argument("reward must be 0 or 1, got " + std::to_string(reward));
}

RolloutRecord::RolloutRecord(QuestionId question_id, std::vector<int> tokens,
                             std::vector<double> logprob_old, int reward)
    : question_id_(question_id),
      tokens_(std::move(tokens)),
      logprob_old_(std::move(logprob_old)),
      reward_(reward) {
  if (tokens_.empty()) throw std::invalid_argument("rollout must have at least one token");
  if (tokens_.size() != logprob_old_.size())
    throw std::invalid_argument("rollout tokens and logprob_old differ in length");
  require_binary_reward(reward_);
}

GroupResult::GroupResult(QuestionId question_id, std::vector<RolloutRecord> rollouts)
    : question_id_(question_id), rollouts_(std::move(rollouts)), pass_rate_(0.0) {
  if (rollouts_.empty()) throw std::invalid_argument("group must contain rollouts");
  long successes = 0;
  for (const auto& r : rollouts_) {
    if (r.question_id() != question_id_)
      throw std::invalid_argument("rollout question id does not match its group");
    successes += r.reward();
  }
  pass_rate_ = static_cast<double>(successes) / static_cast<double>(rollouts_.size());
}

std::vector<int> GroupResult::rewards() const {
  std::vector<int> out;
  out.reserve(rollouts_.size());
  for (const auto& r : rollouts_) out.push_back(r.reward());
  return out;
}

BatchAccuracy::BatchAccuracy(long successes, long n)
    : successes_(successes),
      n_(n),
      value_(static_cast<double>(successes) / static_cast<double>(n)) {}

BatchAccuracy BatchAccuracy::from_rewards(std::span<const int> rewards) {
  long s = 0;
  for (int r : rewards) {
    require_binary_reward(r);
    s += r;
  }
  return from_counts(s, static_cast<long>(rewards.size()));
}

BatchAccuracy BatchAccuracy::from_counts(long successes, long n_rollouts) {
  if (n_rollouts <= 0) throw std::invalid_argument("batch accuracy needs at least one rollout");
  if (successes < 0 || successes > n_rollouts)
    throw std::invalid_argument("success count out of range");
  return BatchAccuracy(successes, n_rollouts);
}

}  // namespace fgexpo
