#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "fgexpo/eval.hpp"
#include "fgexpo/trainer.hpp"

using namespace fgexpo;

namespace {

GeneratedBank small_bank(std::uint64_t seed = 41) {
  RandomStream rng = seeded_rng(seed, "trainer-bank");
  return generate_bank(BankSpec{40, 6, 2, 3, 1.0}, rng);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.group_size = 4;
  cfg.batch_size = 8;
  cfg.total_steps = 30;
  cfg.learning_rate = 2.0;
  cfg.seed = 3;
  return cfg;
}

bool same_params(const PolicyParams& a, const PolicyParams& b) {
  if (a.theta.size() != b.theta.size() || a.temperature != b.temperature) return false;
  for (std::size_t t = 0; t < a.theta.size(); ++t)
    if (a.theta[t] != b.theta[t]) return false;
  return true;
}

double mean_pass_rate(const PolicyParams& p, const QuestionBank& bank) {
  double s = 0.0;
  for (const auto& q : bank.questions()) s += success_probability(p, q);
  return s / static_cast<double>(bank.size());
}

}  // namespace

TEST_CASE("zero steps returns the initial policy and a fresh table") {
  const auto gb = small_bank();
  TrainConfig cfg = small_config();
  cfg.total_steps = 0;
  const RunResult run = train(cfg, gb.bank, gb.init);
  CHECK(run.steps.empty());
  CHECK(same_params(run.final_params, gb.init));
  CHECK(run.final_table == PassRateTable::fresh(gb.bank));
}

TEST_CASE("zero learning rate leaves theta unchanged and the KL term at zero") {
  const auto gb = small_bank();
  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  const RunResult run = train(cfg, gb.bank, gb.init);
  CHECK(same_params(run.final_params, gb.init));
  REQUIRE(run.steps.size() == 30);
  for (const auto& s : run.steps) CHECK(s.objective.kl_estimate == 0.0);
  CHECK(run.final_table.step() == 30);
}

TEST_CASE("step records are internally consistent") {
  const auto gb = small_bank();
  const TrainConfig cfg = small_config();
  const RhoFunction rho(cfg.rho_variant);
  const RunResult run = train(cfg, gb.bank, gb.init);
  REQUIRE(run.steps.size() == 30);
  for (std::size_t i = 0; i < run.steps.size(); ++i) {
    const auto& s = run.steps[i];
    CHECK(s.step == static_cast<long>(i) + 1);
    CHECK(s.sampled.size() == 8);
    CHECK(std::is_sorted(s.sampled.begin(), s.sampled.end()));
    CHECK(std::set<QuestionId>(s.sampled.begin(), s.sampled.end()).size() == 8);
    CHECK(s.batch_accuracy.n_rollouts() == 32);
    CHECK(s.beta_eff == cfg.base_kl_coeff * rho(s.batch_accuracy.value()));
    CHECK(s.objective.beta_eff_used == s.beta_eff);
    CHECK(s.objective.total == s.objective.surrogate - s.beta_eff * s.objective.kl_estimate);
    CHECK(s.objective.kl_estimate >= 0.0);
    double acc = 0.0;
    for (double p : s.pass_rates) acc += p;
    CHECK(acc / 8.0 == doctest::Approx(s.batch_accuracy.value()).epsilon(1e-14));
  }
}

TEST_CASE("training is deterministic given the seed") {
  const auto gb = small_bank();
  const TrainConfig cfg = small_config();
  const RunResult a = train(cfg, gb.bank, gb.init);
  const RunResult b = train(cfg, gb.bank, gb.init);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(same_trajectory_step(a.steps[i], b.steps[i]));
  CHECK(same_params(a.final_params, b.final_params));
  CHECK(a.final_table == b.final_table);

  TrainConfig other = cfg;
  other.seed = 4;
  const RunResult c = train(other, gb.bank, gb.init);
  bool differs = false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) differs |= a.steps[i].sampled != c.steps[i].sampled;
  CHECK(differs);
}

TEST_CASE("constant rho reproduces a fixed KL coefficient") {
  const auto gb = small_bank();
  for (double c : {0.5, 1.0, 2.0}) {
    TrainConfig cfg = small_config();
    cfg.rho_variant = RhoVariant::constant_value(c);
    const RunResult run = train(cfg, gb.bank, gb.init);
    for (const auto& s : run.steps) CHECK(s.beta_eff == cfg.base_kl_coeff * c);
  }
}

TEST_CASE("ablation selectors change only what they should") {
  const auto gb = small_bank();
  const AblationConfigs cfgs = ablation_configs(small_config());
  CHECK(is_grpo_baseline(cfgs.grpo));
  CHECK(cfgs.akl_only.sampler_variant == SamplerVariant::kUniform);
  CHECK(cfgs.akl_only.rho_variant.kind == RhoKind::kTanhShifted);
  CHECK(cfgs.gcs_only.sampler_variant == SamplerVariant::kGaussianCurriculum);
  CHECK(cfgs.gcs_only.rho_variant == RhoVariant::constant_value(1.0));
  CHECK(cfgs.full == small_config());

  // without the curriculum sampler every weight is 1
  bool all_uniform = true;
  train(cfgs.akl_only, gb.bank, gb.init, [&](const StepTrace& tr) {
    for (double w : tr.weights.weights) all_uniform &= w == 1.0;
  });
  CHECK(all_uniform);

  // without the adaptive scale beta_eff is exactly beta
  const RunResult gcs = train(cfgs.gcs_only, gb.bank, gb.init);
  for (const auto& s : gcs.steps) CHECK(s.beta_eff == cfgs.gcs_only.base_kl_coeff);
}

TEST_CASE("uniform sampler visits questions evenly") {
  const auto gb = small_bank();
  TrainConfig cfg = as_grpo_baseline(small_config());
  cfg.learning_rate = 0.0;
  cfg.total_steps = 500;
  const RunResult run = train(cfg, gb.bank, gb.init);
  std::vector<double> counts(gb.bank.size(), 0.0);
  for (const auto& s : run.steps)
    for (auto id : s.sampled) counts[gb.bank.index_of(id)] += 1.0;
  double tv = 0.0;
  const double total = 500.0 * 8.0;
  for (double c : counts) tv += std::abs(c / total - 1.0 / 40.0);
  CHECK(tv / 2 < 0.05);
}

TEST_CASE("training raises the mean pass rate") {
  const auto gb = small_bank();
  TrainConfig cfg = small_config();
  cfg.total_steps = 150;
  const RunResult run = train(cfg, gb.bank, gb.init);
  CHECK(mean_pass_rate(run.final_params, gb.bank) > mean_pass_rate(gb.init, gb.bank) + 0.05);
}

TEST_CASE("train rejects invalid input") {
  const auto gb = small_bank();
  TrainConfig cfg = small_config();
  cfg.batch_size = 41;
  CHECK_THROWS_AS(train(cfg, gb.bank, gb.init), std::invalid_argument);
  cfg = small_config();
  cfg.ema_factor = 1.0;
  CHECK_THROWS_AS(train(cfg, gb.bank, gb.init), ConfigError);
  CHECK_THROWS(train(small_config(), gb.bank, PolicyParams::zeros(2, 3, 7)));
}
