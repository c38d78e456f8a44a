#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fgexpo {

#ifdef FGEXPO_VERSION
inline constexpr std::string_view kVersion = "fgexpo-" FGEXPO_VERSION;
#else
inline constexpr std::string_view kVersion = "fgexpo-unknown";
#endif

using QuestionId = std::int64_t;

/// Raised when a TrainConfig (or any other user-supplied configuration)
/// violates a range constraint. what() lists every violated field.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

enum class RhoKind { kTanhShifted, kConstant };

/// Selector for the accuracy-to-KL-scale map. `constant` is only read when
/// kind == kConstant.
struct RhoVariant {
  RhoKind kind = RhoKind::kTanhShifted;
  double constant = 1.0;

  static RhoVariant tanh_shifted() { return {}; }
  static RhoVariant constant_value(double c) { return {RhoKind::kConstant, c}; }

  bool operator==(const RhoVariant&) const = default;
};

enum class SamplerVariant { kGaussianCurriculum, kUniform };

struct TrainConfig {
  int group_size = 8;
  int batch_size = 16;
  double base_kl_coeff = 0.02;
  double clip_threshold = 0.2;
  double ema_factor = 0.9;
  double curriculum_mean = 0.5;
  double curriculum_std = 0.35;
  double adv_eps = 1e-8;
  double learning_rate = 0.5;
  int total_steps = 200;
  std::uint64_t seed = 0;
  RhoVariant rho_variant;
  SamplerVariant sampler_variant = SamplerVariant::kGaussianCurriculum;
  double sampling_temperature = 1.0;

  bool operator==(const TrainConfig&) const = default;
};

/// Returns cfg unchanged if every field is in range, otherwise throws
/// ConfigError naming each offending field.
TrainConfig validate_config(TrainConfig cfg);

/// The constant-1 scale with uniform sampling: plain GRPO.
TrainConfig as_grpo_baseline(TrainConfig cfg);
bool is_grpo_baseline(const TrainConfig& cfg);

/// One scored completion. Rewards are binary; the constructor rejects
/// anything else.
class RolloutRecord {
 public:
  RolloutRecord(QuestionId question_id, std::vector<int> tokens,
                std::vector<double> logprob_old, int reward);

  QuestionId question_id() const { return question_id_; }
  const std::vector<int>& tokens() const { return tokens_; }
  const std::vector<double>& logprob_old() const { return logprob_old_; }
  int reward() const { return reward_; }
  std::size_t length() const { return tokens_.size(); }

 private:
  QuestionId question_id_;
  std::vector<int> tokens_;
  std::vector<double> logprob_old_;
  int reward_;
};

/// G rollouts of a single question and their empirical pass rate.
class GroupResult {
 public:
  GroupResult(QuestionId question_id, std::vector<RolloutRecord> rollouts);

  QuestionId question_id() const { return question_id_; }
  const std::vector<RolloutRecord>& rollouts() const { return rollouts_; }
  std::size_t size() const { return rollouts_.size(); }
  double empirical_pass_rate() const { return pass_rate_; }
  std::vector<int> rewards() const;

 private:
  QuestionId question_id_;
  std::vector<RolloutRecord> rollouts_;
  double pass_rate_;
};

/// Mean of N binary rewards.
class BatchAccuracy {
 public:
  static BatchAccuracy from_rewards(std::span<const int> rewards);
  static BatchAccuracy from_counts(long successes, long n_rollouts);

  double value() const { return value_; }
  long n_rollouts() const { return n_; }
  long successes() const { return successes_; }

 private:
  BatchAccuracy(long successes, long n);
  long successes_;
  long n_;
  double value_;
};

void require_binary_reward(int reward);

}  // namespace fgexpo
