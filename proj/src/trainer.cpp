#include "fgexpo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace fgexpo {

namespace {

// Per-token log-prob triples for one step's rollouts, laid out [group][rollout][position].
using TripleCache = std::vector<std::vector<std::vector<TokenLogprobTriple>>>;

TripleCache cache_triples(std::span<const GroupResult> groups, const QuestionBank& bank,
                          const PolicyParams& current, const PolicyParams& reference) {
  TripleCache cache(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& q = bank.find(groups[gi].question_id());
    const int L = current.length();
    std::vector<Eigen::VectorXd> cur(static_cast<std::size_t>(L)), ref(static_cast<std::size_t>(L));
    for (int t = 0; t < L; ++t) {
      cur[static_cast<std::size_t>(t)] = position_logprobs(current, q, t);
      ref[static_cast<std::size_t>(t)] = position_logprobs(reference, q, t);
    }
    auto& per_group = cache[gi];
    for (const auto& rollout : groups[gi].rollouts()) {
      std::vector<TokenLogprobTriple> triples(rollout.length());
      for (std::size_t t = 0; t < rollout.length(); ++t) {
        const int tok = rollout.tokens()[t];
        triples[t] = {cur[t][tok], rollout.logprob_old()[t], ref[t][tok]};
        // theta_old is the pre-update theta, so every ratio is exactly 1 here.
        if (triples[t].logp_theta != triples[t].logp_old)
          throw std::logic_error("importance ratio differs from 1 at rollout time");
      }
      per_group.push_back(std::move(triples));
    }
  }
  return cache;
}

}  // namespace

RunResult train(const TrainConfig& cfg_in, const QuestionBank& bank, const PolicyParams& init,
                const StepObserver& observer) {
  const TrainConfig cfg = validate_config(cfg_in);
  if (bank.empty()) throw std::invalid_argument("training needs a non-empty bank");
  if (static_cast<std::size_t>(cfg.batch_size) > bank.size())
    throw std::invalid_argument("batch_size exceeds bank size");
  init.check_compatible(bank);

  const RhoFunction rho(cfg.rho_variant);
  const PolicyParams reference = init.with_temperature(cfg.sampling_temperature);
  PolicyParams policy = reference;
  PassRateTable table = PassRateTable::fresh(bank);
  const RandomStream root = seeded_rng(cfg.seed, "train");

  RunResult result{init, {}, table};
  result.steps.reserve(static_cast<std::size_t>(cfg.total_steps));

  for (long t = 1; t <= cfg.total_steps; ++t) {
    const auto started = std::chrono::steady_clock::now();

    const CurriculumWeights weights =
        cfg.sampler_variant == SamplerVariant::kGaussianCurriculum
            ? compute_weights(table, cfg.curriculum_mean, cfg.curriculum_std)
            : uniform_weights(table);
    RandomStream sampler_rng = root.derive("sampler", t);
    std::vector<QuestionId> batch = sample_batch(weights, cfg.batch_size, sampler_rng);
    std::sort(batch.begin(), batch.end());

    const RandomStream rollout_root = root.derive("rollout", t);
    std::vector<GroupResult> groups;
    groups.reserve(batch.size());
    double abs_adv = 0.0;
    std::size_t n_adv = 0;
    for (QuestionId id : batch) {
      RandomStream rng = rollout_root.derive("question", id);
      groups.emplace_back(id, sample_rollouts(policy, bank.find(id), cfg.group_size, rng));
      for (double a : group_advantages(groups.back().rewards(), cfg.adv_eps)) {
        abs_adv += std::abs(a);
        ++n_adv;
      }
    }

    table = apply_step_updates(table, groups, cfg.ema_factor);

    const BatchAccuracy acc = batch_mean_accuracy(groups);
    const double beta_eff = beta_effective(cfg.base_kl_coeff, acc, rho);

    const TripleCache cache = cache_triples(groups, bank, policy, reference);
    const LogprobProvider provider =
        [&cache](std::size_t g, std::size_t i, std::size_t pos) -> std::optional<TokenLogprobTriple> {
      if (g >= cache.size() || i >= cache[g].size() || pos >= cache[g][i].size()) return std::nullopt;
      return cache[g][i][pos];
    };
    const ObjectiveBreakdown objective =
        batch_objective(groups, provider, beta_eff, cfg.clip_threshold, cfg.adv_eps);
    const ParamTensor grad = objective_gradient(groups, provider, beta_eff, cfg.clip_threshold,
                                                cfg.adv_eps, policy, bank);
    axpy(cfg.learning_rate, grad, policy.theta);

    StepRecord rec{t, batch, acc, beta_eff, objective,
                   abs_adv / static_cast<double>(n_adv), {}, 0.0};
    rec.pass_rates.reserve(groups.size());
    for (const auto& g : groups) rec.pass_rates.push_back(g.empirical_pass_rate());
    rec.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    result.steps.push_back(std::move(rec));
    if (observer) observer(StepTrace{result.steps.back(), weights, table, groups});
  }

  result.final_params = policy;
  result.final_table = std::move(table);
  return result;
}

AblationConfigs ablation_configs(const TrainConfig& cfg) {
  AblationConfigs out{cfg, cfg, cfg, cfg};
  out.grpo = as_grpo_baseline(cfg);
  out.akl_only.rho_variant = RhoVariant::tanh_shifted();
  out.akl_only.sampler_variant = SamplerVariant::kUniform;
  out.gcs_only.rho_variant = RhoVariant::constant_value(1.0);
  out.gcs_only.sampler_variant = SamplerVariant::kGaussianCurriculum;
  out.full.rho_variant = RhoVariant::tanh_shifted();
  out.full.sampler_variant = SamplerVariant::kGaussianCurriculum;
  return out;
}

AblationRuns ablation_matrix(const TrainConfig& cfg, const QuestionBank& bank,
                             const PolicyParams& init) {
  const AblationConfigs c = ablation_configs(cfg);
  return {train(c.grpo, bank, init), train(c.akl_only, bank, init),
          train(c.gcs_only, bank, init), train(c.full, bank, init)};
}

bool same_trajectory_step(const StepRecord& a, const StepRecord& b) {
  return a.step == b.step && a.sampled == b.sampled &&
         a.batch_accuracy.successes() == b.batch_accuracy.successes() &&
         a.batch_accuracy.n_rollouts() == b.batch_accuracy.n_rollouts() &&
         a.beta_eff == b.beta_eff && a.objective.surrogate == b.objective.surrogate &&
         a.objective.kl_estimate == b.objective.kl_estimate &&
         a.objective.beta_eff_used == b.objective.beta_eff_used &&
         a.objective.total == b.objective.total &&
         a.mean_abs_advantage == b.mean_abs_advantage && a.pass_rates == b.pass_rates;
}

}  // namespace fgexpo
