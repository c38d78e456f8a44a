#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fgexpo/testbed.hpp"
#include "oracles.hpp"

using namespace fgexpo;

TEST_CASE("question bank sorts by id and rejects bad shapes") {
  Question a{5, Eigen::VectorXd::Ones(2), {0, 1}};
  Question b{2, Eigen::VectorXd::Zero(2), {1, 1}};
  const QuestionBank bank({a, b}, 2, 2, 2);
  CHECK(bank.ids() == std::vector<QuestionId>{2, 5});
  CHECK(bank.index_of(5) == 1);
  CHECK(bank.find(2).target == std::vector<int>{1, 1});
  CHECK_FALSE(bank.contains(3));
  CHECK_THROWS(bank.find(3));

  CHECK_THROWS(QuestionBank({a, a}, 2, 2, 2));
  Question bad_target{7, Eigen::VectorXd::Ones(2), {0, 2}};
  CHECK_THROWS(QuestionBank({bad_target}, 2, 2, 2));
  Question bad_features{7, Eigen::VectorXd::Ones(3), {0, 1}};
  CHECK_THROWS(QuestionBank({bad_features}, 2, 2, 2));
}

TEST_CASE("log-probs match the naive softmax and normalize") {
  RandomStream rng = seeded_rng(31, "lp");
  const auto inst = oracle::random_instance(rng, 3, 2, 3, 5, 4);
  for (const auto& q : inst.questions)
    for (int t = 0; t < 3; ++t) {
      const Eigen::VectorXd lp = position_logprobs(inst.theta, q, t);
      CHECK(lp.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-14));
      for (int v = 0; v < 5; ++v) CHECK(lp[v] == doctest::Approx(oracle::naive_logprob(inst.theta, q, t, v)).epsilon(1e-13));
    }
}

TEST_CASE("log-probs stay finite for huge logits") {
  PolicyParams p = PolicyParams::zeros(1, 3, 1);
  p.theta[0] << 1000.0, -1000.0, 0.0;
  const Question q{1, Eigen::VectorXd::Ones(1), {0}};
  const Eigen::VectorXd lp = position_logprobs(p, q, 0);
  CHECK(lp.allFinite());
  CHECK(lp[0] == doctest::Approx(0.0));
}

TEST_CASE("success probability is the product of target-token probabilities") {
  RandomStream rng = seeded_rng(32, "pstar");
  const auto inst = oracle::random_instance(rng, 4, 2, 3, 3, 2);
  for (const auto& q : inst.questions) {
    double prod = 1.0;
    for (int t = 0; t < 3; ++t) prod *= std::exp(oracle::naive_logprob(inst.theta, q, t, q.target[t]));
    CHECK(success_probability(inst.theta, q) == doctest::Approx(prod).epsilon(1e-13));
  }
  const PolicyParams uniform = PolicyParams::zeros(3, 4, 2);
  CHECK(success_probability(uniform, inst.questions[0]) == doctest::Approx(1.0 / 64).epsilon(1e-14));
}

TEST_CASE("rollout rewards are binomial in the closed-form pass rate") {
  std::vector<double> rates{0.2, 0.5, 0.85};
  RandomStream gen = seeded_rng(33, "binom-bank");
  const auto gb = bank_with_pass_rates(rates, 2, 3, gen);
  for (std::size_t i = 0; i < rates.size(); ++i)
    CHECK(success_probability(gb.init, gb.bank[i]) == doctest::Approx(rates[i]).epsilon(1e-10));

  constexpr int G = 8, trials = 20000;
  RandomStream rng = seeded_rng(33, "binom");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    std::vector<int> hist(G + 1, 0);
    for (int k = 0; k < trials; ++k) {
      int s = 0;
      for (const auto& r : sample_rollouts(gb.init, gb.bank[i], G, rng)) s += r.reward();
      ++hist[s];
    }
    double chi2 = 0.0;
    for (int s = 0; s <= G; ++s) {
      const double e = trials * oracle::binomial_pmf(G, s, rates[i]);
      chi2 += (hist[s] - e) * (hist[s] - e) / e;
    }
    // 8 degrees of freedom; 0.999 quantile is 26.12
    CHECK(chi2 < 26.12);
  }
}

TEST_CASE("sampled rollouts carry the behaviour log-probs") {
  RandomStream rng = seeded_rng(34, "lpold");
  const auto inst = oracle::random_instance(rng, 1, 2, 4, 3, 3);
  const auto rs = sample_rollouts(inst.theta, inst.questions[0], 16, rng);
  for (const auto& r : rs) {
    CHECK(r.length() == 4);
    const auto lp = policy_logprobs(inst.theta, inst.questions[0], r.tokens());
    for (std::size_t t = 0; t < 4; ++t) CHECK(r.logprob_old()[t] == lp[t]);
    CHECK(r.reward() == verify(r.tokens(), inst.questions[0]));
  }
}

TEST_CASE("log-prob gradient matches finite differences") {
  RandomStream rng = seeded_rng(35, "lpgrad");
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = oracle::random_instance(rng, 1, 2, 3, 4, 3);
    inst.theta.temperature = 0.5 + rng.uniform();
    const Question& q = inst.questions[0];
    const std::vector<int> toks = inst.groups[0].rollouts()[0].tokens();
    const ParamTensor g = logprob_gradient(inst.theta, q, toks);
    const ParamTensor fd = oracle::finite_difference(inst.theta, [&](const PolicyParams& p) {
      double s = 0.0;
      for (int t = 0; t < 3; ++t) s += oracle::naive_logprob(p, q, t, toks[static_cast<std::size_t>(t)]);
      return s;
    });
    CHECK(oracle::relative_error(g, fd) < 1e-7);
  }
}

TEST_CASE("generated bank spreads initial pass rates around one half") {
  RandomStream rng = seeded_rng(36, "gen");
  const BankSpec spec;
  const auto gb = generate_bank(spec, rng);
  CHECK(gb.bank.size() == 300);
  CHECK(gb.bank.features() == spec.features);
  gb.init.check_compatible(gb.bank);

  std::vector<double> p;
  for (const auto& q : gb.bank.questions()) p.push_back(success_probability(gb.init, q));
  std::sort(p.begin(), p.end());
  CHECK(p[150] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(p[15] < 0.3);
  CHECK(p[285] > 0.7);

  RandomStream again = seeded_rng(36, "gen");
  const auto gb2 = generate_bank(spec, again);
  CHECK(gb2.bank.ids() == gb.bank.ids());
  for (std::size_t t = 0; t < gb.init.theta.size(); ++t) CHECK(gb2.init.theta[t] == gb.init.theta[t]);
}

TEST_CASE("check_compatible rejects mismatched or non-finite params") {
  RandomStream rng = seeded_rng(37, "compat");
  const auto gb = generate_bank(BankSpec{20, 4, 2, 3, 1.0}, rng);
  CHECK_NOTHROW(gb.init.check_compatible(gb.bank));
  CHECK_THROWS(PolicyParams::zeros(2, 3, 5).check_compatible(gb.bank));
  PolicyParams bad = gb.init;
  bad.theta[1](0, 0) = NAN;
  CHECK_THROWS(bad.check_compatible(gb.bank));
}
