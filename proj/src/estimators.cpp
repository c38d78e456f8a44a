#include "fgexpo/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fgexpo {

namespace {

void check_triple(const TokenLogprobTriple& t) {
  const bool ok = std::isfinite(t.logp_theta) && std::isfinite(t.logp_old) &&
                  std::isfinite(t.logp_ref) && t.logp_theta <= 0.0 && t.logp_old <= 0.0 &&
                  t.logp_ref <= 0.0;
  if (!ok) throw std::invalid_argument("token log-probabilities must be finite and <= 0");
}

void check_clip(double eps_clip) {
  if (!(eps_clip > 0.0 && eps_clip < 1.0)) throw std::invalid_argument("eps_clip must lie in (0,1)");
}

TokenLogprobTriple fetch(const LogprobProvider& provider, std::size_t g, std::size_t i,
                         std::size_t t) {
  const auto triple = provider(g, i, t);
  if (!triple)
    throw std::invalid_argument("log-prob provider does not cover group " + std::to_string(g) +
                                ", rollout " + std::to_string(i) + ", position " +
                                std::to_string(t));
  check_triple(*triple);
  return *triple;
}

void check_groups(std::span<const GroupResult> groups) {
  if (groups.empty()) throw std::invalid_argument("objective needs at least one group");
  const std::size_t G = groups.front().size();
  for (const auto& g : groups)
    if (g.size() != G) throw std::invalid_argument("all groups must share the same group size");
}

// Visits every token in the fixed (group, rollout, position) order and hands
// the callback the rollout's advantage and the 1/(N * L_i) weight of that
// token in the objective.
template <typename Fn>
void for_each_token(std::span<const GroupResult> groups, const LogprobProvider& provider,
                    double eps_adv, Fn&& fn) {
  check_groups(groups);
  std::size_t n_rollouts = 0;
  for (const auto& g : groups) n_rollouts += g.size();
  const double per_rollout = 1.0 / static_cast<double>(n_rollouts);

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& group = groups[gi];
    const auto rewards = group.rewards();
    const auto adv = group_advantages(rewards, eps_adv);
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto& rollout = group.rollouts()[i];
      const double w = per_rollout / static_cast<double>(rollout.length());
      for (std::size_t t = 0; t < rollout.length(); ++t)
        fn(gi, i, t, fetch(provider, gi, i, t), adv[i], w);
    }
  }
}

}  // namespace

std::vector<double> group_advantages(std::span<const int> rewards, double eps_adv) {
  if (rewards.size() < 2) throw std::invalid_argument("group advantages need G >= 2");
  if (!(eps_adv > 0.0)) throw std::invalid_argument("eps_adv must be positive");
  const double G = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (int r : rewards) {
    require_binary_reward(r);
    mean += r;
  }
  mean /= G;
  double var = 0.0;
  for (int r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / G);

  std::vector<double> out;
  out.reserve(rewards.size());
  for (int r : rewards) out.push_back((r - mean) / (sd + eps_adv));
  return out;
}

double k3_estimate(const TokenLogprobTriple& triple) {
  if (!std::isfinite(triple.logp_theta) || !std::isfinite(triple.logp_ref))
    throw std::invalid_argument("k3 needs finite log-probabilities");
  const double log_r = triple.logp_ref - triple.logp_theta;
  if (log_r == 0.0) return 0.0;
  // Near r = 1 the direct form cancels to zero; the series stays positive.
  if (std::abs(log_r) < 1e-4) {
    const double x = log_r;
    return 0.5 * x * x * (1.0 + x / 3.0 + x * x / 12.0 + x * x * x / 60.0);
  }
  return std::max(0.0, std::expm1(log_r) - log_r);
}

double k3_slope(const TokenLogprobTriple& triple) {
  return -std::expm1(triple.logp_ref - triple.logp_theta);
}

double clipped_token_term(double ratio, double advantage, double eps_clip) {
  if (!(ratio > 0.0)) throw std::invalid_argument("importance ratio must be positive");
  check_clip(eps_clip);
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_token_slope(double ratio, double advantage, double eps_clip) {
  if (!(ratio > 0.0)) throw std::invalid_argument("importance ratio must be positive");
  check_clip(eps_clip);
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return ratio * advantage <= clipped * advantage ? ratio * advantage : 0.0;
}

ObjectiveBreakdown batch_objective(std::span<const GroupResult> groups,
                                   const LogprobProvider& provider, double beta_eff,
                                   double eps_clip, double eps_adv) {
  check_clip(eps_clip);
  if (!(beta_eff >= 0.0)) throw std::invalid_argument("beta_eff must be non-negative");
  ObjectiveBreakdown out;
  for_each_token(groups, provider, eps_adv,
                 [&](std::size_t, std::size_t, std::size_t, const TokenLogprobTriple& tr,
                     double adv, double w) {
                   const double ratio = std::exp(tr.logp_theta - tr.logp_old);
                   out.surrogate += w * clipped_token_term(ratio, adv, eps_clip);
                   out.kl_estimate += w * k3_estimate(tr);
                 });
  out.beta_eff_used = beta_eff;
  out.total = out.surrogate - beta_eff * out.kl_estimate;
  return out;
}

ParamTensor objective_gradient(std::span<const GroupResult> groups,
                               const LogprobProvider& provider, double beta_eff,
                               double eps_clip, double eps_adv, const PolicyParams& params,
                               const QuestionBank& bank) {
  check_clip(eps_clip);
  if (!(beta_eff >= 0.0)) throw std::invalid_argument("beta_eff must be non-negative");
  ParamTensor grad = zeros_like(params);
  for_each_token(groups, provider, eps_adv,
                 [&](std::size_t gi, std::size_t i, std::size_t t, const TokenLogprobTriple& tr,
                     double adv, double w) {
                   const double ratio = std::exp(tr.logp_theta - tr.logp_old);
                   const double slope = clipped_token_slope(ratio, adv, eps_clip) -
                                        beta_eff * k3_slope(tr);
                   if (slope == 0.0) return;
                   const auto& rollout = groups[gi].rollouts()[i];
                   accumulate_logprob_gradient(params, bank.find(rollout.question_id()),
                                               static_cast<int>(t), rollout.tokens()[t],
                                               w * slope, grad);
                 });
  return grad;
}

}  // namespace fgexpo
