#include <doctest.h>

#include <cmath>
#include <vector>

#include "fgexpo/estimators.hpp"
#include "oracles.hpp"

using namespace fgexpo;

namespace {

LogprobProvider provider_for(const oracle::Instance& inst, const PolicyParams& theta) {
  return [&inst, theta](std::size_t g, std::size_t i, std::size_t t) -> std::optional<TokenLogprobTriple> {
    const auto& grp = inst.groups.at(g);
    const auto& r = grp.rollouts().at(i);
    if (t >= r.length()) return std::nullopt;
    const Question* q = nullptr;
    for (const auto& cand : inst.questions)
      if (cand.id == grp.question_id()) q = &cand;
    const int tok = r.tokens()[t];
    return TokenLogprobTriple{position_logprobs(theta, *q, static_cast<int>(t))[tok], r.logprob_old()[t],
                              position_logprobs(inst.ref, *q, static_cast<int>(t))[tok]};
  };
}

}  // namespace

TEST_CASE("group advantages: worked examples") {
  const auto a = group_advantages(std::vector<int>{1, 0, 0, 0}, 1e-8);
  CHECK(a[0] == doctest::Approx(1.7320507675688783).epsilon(1e-12));
  for (int i = 1; i < 4; ++i) CHECK(a[i] == doctest::Approx(-0.5773502558562927).epsilon(1e-12));

  for (const auto& degenerate : {std::vector<int>{1, 1, 1, 1}, std::vector<int>{0, 0, 0, 0}})
    for (double x : group_advantages(degenerate, 1e-8)) CHECK(x == 0.0);

  CHECK_THROWS(group_advantages(std::vector<int>{1}, 1e-8));
  CHECK_THROWS(group_advantages(std::vector<int>{1, 2}, 1e-8));
}

TEST_CASE("group advantages are centred and unit-scaled for mixed groups") {
  RandomStream rng = seeded_rng(11, "adv");
  for (int trial = 0; trial < 2000; ++trial) {
    const int G = 2 + static_cast<int>(rng.uniform() * 15);
    std::vector<int> r(static_cast<std::size_t>(G));
    for (auto& x : r) x = rng.uniform() < 0.5 ? 1 : 0;
    r[0] = 1;
    r[1] = 0;
    const auto a = group_advantages(r, 1e-8);
    double mean = 0.0;
    for (double x : a) mean += x;
    mean /= G;
    double var = 0.0;
    for (double x : a) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / G);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(sd <= 1.0);
    CHECK(sd >= 1.0 - 1e-6);
  }
}

TEST_CASE("k3 estimator: worked examples") {
  CHECK(k3_estimate({-1.3, -1.3, -1.3}) == 0.0);
  CHECK(k3_estimate({-1.0, -1.0, -1.0 + std::log(2.0)}) == doctest::Approx(0.3068528194400546).epsilon(1e-12));
  CHECK(k3_estimate({-1.0, -1.0, -1.0 - std::log(2.0)}) == doctest::Approx(0.1931471805599454).epsilon(1e-12));
  CHECK_THROWS(k3_estimate({NAN, 0.0, -1.0}));
}

TEST_CASE("k3 is non-negative and zero only at equal log-probs") {
  RandomStream rng = seeded_rng(12, "k3");
  for (int i = 0; i < 200000; ++i) {
    const double a = -20.0 * rng.uniform();
    const double b = i % 3 == 0 ? a + 1e-9 * rng.normal() : -20.0 * rng.uniform();
    const double k = k3_estimate({a, a, b});
    REQUIRE(k >= 0.0);
    REQUIRE((k == 0.0) == (a == b));
  }
}

TEST_CASE("k3 is unbiased for KL(P||Q)") {
  const std::vector<double> P{0.30, 0.20, 0.15, 0.10, 0.10, 0.07, 0.05, 0.03};
  const std::vector<double> Q{0.10, 0.10, 0.10, 0.20, 0.15, 0.15, 0.10, 0.10};
  double exact = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) exact += P[i] * std::log(P[i] / Q[i]);

  RandomStream rng = seeded_rng(13, "k3-mc");
  constexpr int n = 100000;
  double s = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto tok = rng.categorical(P);
    const double k = k3_estimate({std::log(P[tok]), std::log(P[tok]), std::log(Q[tok])});
    s += k;
    sq += k * k;
  }
  const double mean = s / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - exact) < 3.0 * se);
}

TEST_CASE("clipped token term: worked examples and pessimism") {
  CHECK(clipped_token_term(1.0, 0.37, 0.2) == 0.37);
  CHECK(clipped_token_term(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_token_term(1.5, -1.0, 0.2) == doctest::Approx(-1.5));
  CHECK_THROWS(clipped_token_term(0.0, 1.0, 0.2));
  CHECK_THROWS(clipped_token_term(1.0, 1.0, 1.5));

  RandomStream rng = seeded_rng(14, "clip");
  for (int i = 0; i < 100000; ++i) {
    const double ratio = std::exp(rng.normal());
    const double adv = 3.0 * rng.normal();
    const double eps = 0.05 + 0.9 * rng.uniform();
    const double v = clipped_token_term(ratio, adv, eps);
    REQUIRE(v <= ratio * adv);
    if (ratio >= 1.0 - eps && ratio <= 1.0 + eps) REQUIRE(v == ratio * adv);
  }
}

TEST_CASE("batch objective at identical policies") {
  RandomStream rng = seeded_rng(15, "obj-id");
  oracle::Instance inst = oracle::random_instance(rng, 3, 4, 3, 3, 2, 0.0);
  inst.ref = inst.old;
  const auto provider = provider_for(inst, inst.theta);
  const auto out = batch_objective(inst.groups, provider, 0.02, 0.2, 1e-8);
  double mean_adv = 0.0;
  int n = 0;
  for (const auto& g : inst.groups)
    for (double a : group_advantages(g.rewards(), 1e-8)) {
      mean_adv += a;
      ++n;
    }
  CHECK(out.kl_estimate == 0.0);
  CHECK(out.surrogate == doctest::Approx(mean_adv / n).epsilon(1e-12));
  CHECK(out.total == out.surrogate - out.beta_eff_used * out.kl_estimate);

  // single saturated group
  std::vector<RolloutRecord> rs;
  for (int g = 0; g < 4; ++g) rs.push_back(inst.groups[0].rollouts()[static_cast<std::size_t>(g)]);
  std::vector<RolloutRecord> sat;
  for (const auto& r : rs) sat.emplace_back(r.question_id(), r.tokens(), r.logprob_old(), 1);
  const std::vector<GroupResult> one{GroupResult(sat.front().question_id(), sat)};
  oracle::Instance single = inst;
  single.groups = one;
  CHECK(batch_objective(one, provider_for(single, single.theta), 0.02, 0.2, 1e-8).total == 0.0);
}

TEST_CASE("batch objective matches the naive triple loop") {
  RandomStream rng = seeded_rng(16, "obj-naive");
  for (int trial = 0; trial < 20; ++trial) {
    const oracle::Instance inst = oracle::random_instance(rng, 2, 4, 3, 4, 3);
    const auto out = batch_objective(inst.groups, provider_for(inst, inst.theta), 0.02, 0.2, 1e-8);
    const auto ref = oracle::naive_objective(inst.groups, inst.questions, inst.theta, inst.ref, 0.02, 0.2, 1e-8);
    CHECK(out.surrogate == doctest::Approx(ref.surrogate).epsilon(1e-12));
    CHECK(out.kl_estimate == doctest::Approx(ref.kl).epsilon(1e-12));
    CHECK(out.total == doctest::Approx(ref.total).epsilon(1e-12));
    CHECK(out.kl_estimate >= 0.0);
  }
}

TEST_CASE("batch objective rejects incomplete coverage and ragged groups") {
  RandomStream rng = seeded_rng(17, "obj-err");
  const oracle::Instance inst = oracle::random_instance(rng, 2, 4, 2, 3, 2);
  const LogprobProvider missing = [](std::size_t, std::size_t, std::size_t t) -> std::optional<TokenLogprobTriple> {
    if (t == 1) return std::nullopt;
    return TokenLogprobTriple{-1.0, -1.0, -1.0};
  };
  CHECK_THROWS(batch_objective(inst.groups, missing, 0.0, 0.2, 1e-8));

  const oracle::Instance other = oracle::random_instance(rng, 1, 3, 2, 3, 2);
  std::vector<GroupResult> ragged = inst.groups;
  ragged.push_back(other.groups.front());
  CHECK_THROWS(batch_objective(ragged, provider_for(inst, inst.theta), 0.0, 0.2, 1e-8));
}

TEST_CASE("objective gradient with vanishing advantages is the KL gradient alone") {
  RandomStream rng = seeded_rng(18, "grad-zero");
  oracle::Instance inst = oracle::random_instance(rng, 2, 4, 2, 3, 3, 0.0);
  for (auto& g : inst.groups) {
    std::vector<RolloutRecord> sat;
    for (const auto& r : g.rollouts()) sat.emplace_back(r.question_id(), r.tokens(), r.logprob_old(), 0);
    g = GroupResult(g.question_id(), sat);
  }
  const QuestionBank bank = inst.bank();
  const auto provider = provider_for(inst, inst.theta);
  const ParamTensor surr = objective_gradient(inst.groups, provider, 0.0, 0.2, 1e-8, inst.theta, bank);
  CHECK(squared_norm(surr) == 0.0);

  const double beta = 0.02;
  const ParamTensor total = objective_gradient(inst.groups, provider, beta, 0.2, 1e-8, inst.theta, bank);
  const ParamTensor fd = oracle::finite_difference(inst.theta, [&](const PolicyParams& p) {
    return -beta * oracle::naive_objective(inst.groups, inst.questions, p, inst.ref, 0.0, 0.2, 1e-8).kl;
  });
  CHECK(oracle::relative_error(total, fd) < 1e-6);
}

TEST_CASE("objective gradient matches central finite differences") {
  RandomStream rng = seeded_rng(19, "grad-fd");
  int checked = 0;
  for (int trial = 0; checked < 20 && trial < 200; ++trial) {
    const int V = 2 + static_cast<int>(rng.uniform() * 4);
    const int L = 1 + static_cast<int>(rng.uniform() * 4);
    const int G = 2 + static_cast<int>(rng.uniform() * 7);
    const oracle::Instance inst = oracle::random_instance(rng, 2, G, L, V, 3);
    if (oracle::distance_to_kink(inst, 0.2) < 1e-3) continue;
    if (std::sqrt(squared_norm(oracle::surrogate_fd(inst))) < 1e-8) continue;
    const QuestionBank bank = inst.bank();
    for (double beta : {0.0, 0.02}) {
      const ParamTensor g =
          objective_gradient(inst.groups, provider_for(inst, inst.theta), beta, 0.2, 1e-8, inst.theta, bank);
      const ParamTensor fd = oracle::finite_difference(inst.theta, [&](const PolicyParams& p) {
        return oracle::naive_objective(inst.groups, inst.questions, p, inst.ref, beta, 0.2, 1e-8).total;
      });
      CHECK(oracle::relative_error(g, fd) < 1e-6);
    }
    ++checked;
  }
  CHECK(checked == 20);
}
