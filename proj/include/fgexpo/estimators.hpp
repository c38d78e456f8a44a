#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fgexpo/core.hpp"
#include "fgexpo/testbed.hpp"

namespace fgexpo {

/// Log-probabilities of one realized token under the current, behaviour and
/// reference policies.
struct TokenLogprobTriple {
  double logp_theta = 0.0;
  double logp_old = 0.0;
  double logp_ref = 0.0;
};

struct ObjectiveBreakdown {
  double surrogate = 0.0;
  double kl_estimate = 0.0;
  double beta_eff_used = 0.0;
  double total = 0.0;
};

/// Token log-probs for (group index, rollout index, position); nullopt
/// marks a token the provider cannot cover.
using LogprobProvider =
    std::function<std::optional<TokenLogprobTriple>(std::size_t, std::size_t, std::size_t)>;

/// (R_g - mean) / (population std + eps_adv). Zero-variance groups give
/// exact zeros.
std::vector<double> group_advantages(std::span<const int> rewards, double eps_adv);

/// K3 estimate r - log r - 1 with r = pi_ref / pi_theta at the token.
double k3_estimate(const TokenLogprobTriple& triple);
/// d k3 / d logp_theta = 1 - r.
double k3_slope(const TokenLogprobTriple& triple);

double clipped_token_term(double ratio, double advantage, double eps_clip);
/// d clipped_token_term / d logp_theta. Zero where the clipped constant
/// branch is strictly selected; ratio * advantage otherwise.
double clipped_token_slope(double ratio, double advantage, double eps_clip);

/// Clipped surrogate minus beta_eff times the mean K3 penalty. Tokens are
/// averaged within each rollout, then rollouts are averaged uniformly.
ObjectiveBreakdown batch_objective(std::span<const GroupResult> groups,
                                   const LogprobProvider& provider, double beta_eff,
                                   double eps_clip, double eps_adv);

/// Analytic gradient of batch_objective(...).total with respect to
/// params.theta. theta_old and the reference policy are held fixed; the
/// provider must report logp_theta evaluated at `params`.
ParamTensor objective_gradient(std::span<const GroupResult> groups,
                               const LogprobProvider& provider, double beta_eff,
                               double eps_clip, double eps_adv, const PolicyParams& params,
                               const QuestionBank& bank);

}  // namespace fgexpo
