#pragma once

#include <Eigen/Dense>

#include <span>
#include <unordered_map>
#include <vector>

#include "fgexpo/core.hpp"
#include "fgexpo/rng.hpp"

namespace fgexpo {

struct Question {
  QuestionId id = 0;
  Eigen::VectorXd features;
  std::vector<int> target;
};

/// Questions sharing one (F, L, V) shape, kept sorted by id.
class QuestionBank {
 public:
  QuestionBank(std::vector<Question> questions, int features, int length, int vocab);

  int features() const { return features_; }
  int length() const { return length_; }
  int vocab() const { return vocab_; }
  std::size_t size() const { return questions_.size(); }
  bool empty() const { return questions_.empty(); }

  const std::vector<Question>& questions() const { return questions_; }
  const Question& operator[](std::size_t i) const { return questions_[i]; }
  const Question& find(QuestionId id) const;
  bool contains(QuestionId id) const { return index_.contains(id); }
  std::size_t index_of(QuestionId id) const;
  std::vector<QuestionId> ids() const;

 private:
  std::vector<Question> questions_;
  std::unordered_map<QuestionId, std::size_t> index_;
  int features_;
  int length_;
  int vocab_;
};

/// Same shape as PolicyParams::theta: one V x F matrix per position.
using ParamTensor = std::vector<Eigen::MatrixXd>;

/// Position-factored softmax policy. Position t draws its token from
/// softmax(theta[t] * x / temperature), independent of earlier tokens.
struct PolicyParams {
  ParamTensor theta;
  double temperature = 1.0;

  static PolicyParams zeros(int length, int vocab, int features, double temperature = 1.0);

  int length() const { return static_cast<int>(theta.size()); }
  int vocab() const { return theta.empty() ? 0 : static_cast<int>(theta.front().rows()); }
  int features() const { return theta.empty() ? 0 : static_cast<int>(theta.front().cols()); }

  PolicyParams with_temperature(double t) const;
  /// Throws if entries are non-finite or the shape is inconsistent with bank.
  void check_compatible(const QuestionBank& bank) const;
};

ParamTensor zeros_like(const PolicyParams& params);
/// theta += scale * direction, in place.
void axpy(double scale, const ParamTensor& direction, ParamTensor& theta);
double squared_norm(const ParamTensor& t);

struct BankSpec {
  int n = 300;
  int features = 16;
  int length = 3;
  int vocab = 4;
  double difficulty_spread = 1.0;

  bool operator==(const BankSpec&) const = default;
};

struct GeneratedBank {
  QuestionBank bank;
  PolicyParams init;
};

/// Random bank plus an initial policy whose per-question pass rates are
/// spread over (0,1).
///
/// Features are uniform on the unit sphere; targets are the per-position
/// argmax of a hidden random linear teacher, so every answer is reachable
/// by some theta. Each question gets a target margin m + spread * z_q with
/// z_q ~ N(0,1), where m is the margin giving pass rate 1/2 when the target
/// beats every other token by m at each position. theta is the ridge
/// regression of those margin-scaled target logits on the features, then
/// rescaled globally so the median pass rate sits at 1/2 when reachable.
GeneratedBank generate_bank(const BankSpec& spec, RandomStream& rng);

/// One-hot-feature bank whose initial policy hits the given per-question
/// success probabilities exactly (question i gets pass_rates[i]).
GeneratedBank bank_with_pass_rates(std::span<const double> pass_rates, int length, int vocab,
                                   RandomStream& rng);

/// Log-softmax over the vocabulary at one position.
Eigen::VectorXd position_logprobs(const PolicyParams& params, const Question& q, int position);

/// Per-token log-probabilities of a full token sequence.
std::vector<double> policy_logprobs(const PolicyParams& params, const Question& q,
                                    std::span<const int> tokens);

/// Closed-form probability that one rollout matches the target.
double success_probability(const PolicyParams& params, const Question& q);

int verify(std::span<const int> tokens, const Question& q);

std::vector<RolloutRecord> sample_rollouts(const PolicyParams& params, const Question& q,
                                           int group_size, RandomStream& rng);

/// Gradient of sum_t log pi(tokens[t]) with respect to theta.
ParamTensor logprob_gradient(const PolicyParams& params, const Question& q,
                             std::span<const int> tokens);

/// grad[position] += coef * d log pi(token at position) / d theta[position].
void accumulate_logprob_gradient(const PolicyParams& params, const Question& q, int position,
                                 int token, double coef, ParamTensor& grad);

}  // namespace fgexpo
