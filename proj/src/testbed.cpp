#include "fgexpo/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fgexpo {

namespace {

void check_shape(int features, int length, int vocab) {
  if (features < 1) throw std::invalid_argument("feature dimension must be positive");
  if (length < 1) throw std::invalid_argument("sequence length must be positive");
  if (vocab < 2) throw std::invalid_argument("vocabulary must have at least two tokens");
}

// Margin by which the target logit must beat the V-1 others (all equal) for
// the target to get probability `per_position`.
double margin_for(double per_position, int vocab) {
  return std::log((vocab - 1) * per_position / (1.0 - per_position));
}

void check_tokens(std::span<const int> tokens, const Question& q, int vocab) {
  if (tokens.size() != q.target.size())
    throw std::invalid_argument("token sequence length " + std::to_string(tokens.size()) +
                                " does not match L=" + std::to_string(q.target.size()));
  for (int tok : tokens)
    if (tok < 0 || tok >= vocab) throw std::invalid_argument("token out of vocabulary");
}

double median_success(const PolicyParams& params, const QuestionBank& bank) {
  std::vector<double> p;
  p.reserve(bank.size());
  for (const auto& q : bank.questions()) p.push_back(success_probability(params, q));
  auto mid = p.begin() + static_cast<std::ptrdiff_t>(p.size() / 2);
  std::nth_element(p.begin(), mid, p.end());
  return *mid;
}

PolicyParams scaled(const PolicyParams& params, double c) {
  PolicyParams out = params;
  for (auto& m : out.theta) m *= c;
  return out;
}

}  // namespace

QuestionBank::QuestionBank(std::vector<Question> questions, int features, int length, int vocab)
    : questions_(std::move(questions)), features_(features), length_(length), vocab_(vocab) {
  check_shape(features, length, vocab);
  std::sort(questions_.begin(), questions_.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    const auto& q = questions_[i];
    if (q.features.size() != features_)
      throw std::invalid_argument("question " + std::to_string(q.id) + " has wrong feature dimension");
    if (!q.features.allFinite())
      throw std::invalid_argument("question " + std::to_string(q.id) + " has non-finite features");
    if (static_cast<int>(q.target.size()) != length_)
      throw std::invalid_argument("question " + std::to_string(q.id) + " has wrong target length");
    for (int tok : q.target)
      if (tok < 0 || tok >= vocab_)
        throw std::invalid_argument("question " + std::to_string(q.id) + " target token out of vocabulary");
    if (!index_.emplace(q.id, i).second)
      throw std::invalid_argument("duplicate question id " + std::to_string(q.id));
  }
}

const Question& QuestionBank::find(QuestionId id) const { return questions_[index_of(id)]; }

std::size_t QuestionBank::index_of(QuestionId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown question id " + std::to_string(id));
  return it->second;
}

std::vector<QuestionId> QuestionBank::ids() const {
  std::vector<QuestionId> out;
  out.reserve(questions_.size());
  for (const auto& q : questions_) out.push_back(q.id);
  return out;
}

PolicyParams PolicyParams::zeros(int length, int vocab, int features, double temperature) {
  check_shape(features, length, vocab);
  PolicyParams p;
  p.theta.assign(static_cast<std::size_t>(length), Eigen::MatrixXd::Zero(vocab, features));
  p.temperature = temperature;
  return p;
}

PolicyParams PolicyParams::with_temperature(double t) const {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("temperature must be positive");
  PolicyParams out = *this;
  out.temperature = t;
  return out;
}

void PolicyParams::check_compatible(const QuestionBank& bank) const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("policy temperature must be positive");
  if (length() != bank.length() || vocab() != bank.vocab() || features() != bank.features())
    throw std::invalid_argument("policy shape does not match question bank");
  for (const auto& m : theta) {
    if (m.rows() != bank.vocab() || m.cols() != bank.features())
      throw std::invalid_argument("policy position matrices have inconsistent shapes");
    if (!m.allFinite()) throw std::invalid_argument("policy parameters are not finite");
  }
}

ParamTensor zeros_like(const PolicyParams& params) {
  ParamTensor out;
  out.reserve(params.theta.size());
  for (const auto& m : params.theta) out.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
  return out;
}

void axpy(double scale, const ParamTensor& direction, ParamTensor& theta) {
  if (direction.size() != theta.size()) throw std::invalid_argument("axpy shape mismatch");
  for (std::size_t t = 0; t < theta.size(); ++t) theta[t] += scale * direction[t];
}

double squared_norm(const ParamTensor& t) {
  double s = 0.0;
  for (const auto& m : t) s += m.squaredNorm();
  return s;
}

GeneratedBank generate_bank(const BankSpec& spec, RandomStream& rng) {
  if (spec.n < 1) throw std::invalid_argument("bank size must be positive");
  check_shape(spec.features, spec.length, spec.vocab);
  if (!(spec.difficulty_spread > 0.0) || !std::isfinite(spec.difficulty_spread))
    throw std::invalid_argument("difficulty_spread must be positive");

  const int n = spec.n;
  const int F = spec.features;
  const int L = spec.length;
  const int V = spec.vocab;

  RandomStream feat_rng = rng.derive("features");
  RandomStream target_rng = rng.derive("targets");
  RandomStream diff_rng = rng.derive("difficulty");

  // Targets are the argmax of a hidden linear teacher, so the policy class
  // can represent every answer in the bank.
  std::vector<Eigen::MatrixXd> teacher(static_cast<std::size_t>(L), Eigen::MatrixXd(V, F));
  for (auto& w : teacher)
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = target_rng.normal();

  std::vector<Question> questions(static_cast<std::size_t>(n));
  Eigen::MatrixXd X(F, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(F);
    for (int f = 0; f < F; ++f) x[f] = feat_rng.normal();
    const double norm = x.norm();
    // A zero draw has probability ~0; fall back to the first axis.
    if (norm > 0.0) x /= norm; else x[0] = 1.0;
    X.col(i) = x;

    auto& q = questions[static_cast<std::size_t>(i)];
    q.id = i;
    q.features = std::move(x);
    q.target.resize(static_cast<std::size_t>(L));
    for (int t = 0; t < L; ++t) {
      Eigen::Index best = 0;
      (teacher[static_cast<std::size_t>(t)] * q.features).maxCoeff(&best);
      q.target[static_cast<std::size_t>(t)] = static_cast<int>(best);
    }
  }

  const double half_margin = margin_for(std::pow(0.5, 1.0 / L), V);
  std::vector<double> margin(static_cast<std::size_t>(n));
  for (auto& m : margin) m = half_margin + spec.difficulty_spread * diff_rng.normal();

  constexpr double kRidge = 1e-2;
  Eigen::MatrixXd gram = X * X.transpose();
  gram.diagonal().array() += kRidge;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);

  PolicyParams init = PolicyParams::zeros(L, V, F);
  for (int t = 0; t < L; ++t) {
    Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(V, n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double m = margin[static_cast<std::size_t>(i)];
      Y.col(i).setConstant(-m / V);
      Y(questions[static_cast<std::size_t>(i)].target[static_cast<std::size_t>(t)], i) += m;
    }
    // theta^T = (X X^T + lambda I)^{-1} X Y^T
    init.theta[static_cast<std::size_t>(t)] = solver.solve(X * Y.transpose()).transpose();
  }

  QuestionBank bank(std::move(questions), F, L, V);

  // Ridge shrinkage pulls every margin toward zero when F < n; restore a
  // frontier-centred median by bisecting on a global scale.
  const double uniform_rate = std::pow(1.0 / V, L);
  if (uniform_rate < 0.5) {
    double hi = 1.0;
    while (median_success(scaled(init, hi), bank) < 0.5 && hi < 1024.0) hi *= 2.0;
    if (median_success(scaled(init, hi), bank) >= 0.5) {
      double lo = 0.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (median_success(scaled(init, mid), bank) < 0.5) lo = mid; else hi = mid;
      }
      init = scaled(init, hi);
    }
  }

  return {std::move(bank), std::move(init)};
}

GeneratedBank bank_with_pass_rates(std::span<const double> pass_rates, int length, int vocab,
                                   RandomStream& rng) {
  const int n = static_cast<int>(pass_rates.size());
  if (n < 1) throw std::invalid_argument("need at least one pass rate");
  check_shape(n, length, vocab);
  RandomStream target_rng = rng.derive("targets");

  std::vector<Question> questions(static_cast<std::size_t>(n));
  PolicyParams init = PolicyParams::zeros(length, vocab, n);
  for (int i = 0; i < n; ++i) {
    const double p = pass_rates[static_cast<std::size_t>(i)];
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("pass rates must lie in (0,1)");
    auto& q = questions[static_cast<std::size_t>(i)];
    q.id = i;
    q.features = Eigen::VectorXd::Unit(n, i);
    q.target.resize(static_cast<std::size_t>(length));
    const double m = margin_for(std::pow(p, 1.0 / length), vocab);
    for (int t = 0; t < length; ++t) {
      const int y = std::min(vocab - 1, static_cast<int>(target_rng.uniform() * vocab));
      q.target[static_cast<std::size_t>(t)] = y;
      init.theta[static_cast<std::size_t>(t)](y, i) = m;
    }
  }
  return {QuestionBank(std::move(questions), n, length, vocab), std::move(init)};
}

Eigen::VectorXd position_logprobs(const PolicyParams& params, const Question& q, int position) {
  if (position < 0 || position >= params.length()) throw std::out_of_range("position out of range");
  const Eigen::VectorXd z = (params.theta[static_cast<std::size_t>(position)] * q.features) / params.temperature;
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  return (z.array() - lse).matrix();
}

std::vector<double> policy_logprobs(const PolicyParams& params, const Question& q,
                                    std::span<const int> tokens) {
  check_tokens(tokens, q, params.vocab());
  std::vector<double> out(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t)
    out[t] = position_logprobs(params, q, static_cast<int>(t))[tokens[t]];
  return out;
}

double success_probability(const PolicyParams& params, const Question& q) {
  double logp = 0.0;
  for (std::size_t t = 0; t < q.target.size(); ++t)
    logp += position_logprobs(params, q, static_cast<int>(t))[q.target[t]];
  return std::exp(logp);
}

int verify(std::span<const int> tokens, const Question& q) {
  if (tokens.size() != q.target.size())
    throw std::invalid_argument("rollout length does not match target length");
  return std::equal(tokens.begin(), tokens.end(), q.target.begin()) ? 1 : 0;
}

std::vector<RolloutRecord> sample_rollouts(const PolicyParams& params, const Question& q,
                                           int group_size, RandomStream& rng) {
  if (group_size < 1) throw std::invalid_argument("group size must be positive");
  const int L = params.length();
  if (static_cast<int>(q.target.size()) != L)
    throw std::invalid_argument("policy length does not match question");

  std::vector<Eigen::VectorXd> logp(static_cast<std::size_t>(L));
  std::vector<std::vector<double>> probs(static_cast<std::size_t>(L));
  for (int t = 0; t < L; ++t) {
    auto& lp = logp[static_cast<std::size_t>(t)];
    lp = position_logprobs(params, q, t);
    auto& p = probs[static_cast<std::size_t>(t)];
    p.resize(static_cast<std::size_t>(lp.size()));
    for (Eigen::Index v = 0; v < lp.size(); ++v) p[static_cast<std::size_t>(v)] = std::exp(lp[v]);
  }

  std::vector<RolloutRecord> out;
  out.reserve(static_cast<std::size_t>(group_size));
  for (int g = 0; g < group_size; ++g) {
    std::vector<int> tokens(static_cast<std::size_t>(L));
    std::vector<double> old(static_cast<std::size_t>(L));
    for (int t = 0; t < L; ++t) {
      const auto tok = rng.categorical(probs[static_cast<std::size_t>(t)]);
      tokens[static_cast<std::size_t>(t)] = static_cast<int>(tok);
      old[static_cast<std::size_t>(t)] = logp[static_cast<std::size_t>(t)][static_cast<Eigen::Index>(tok)];
    }
    const int reward = verify(tokens, q);
    out.emplace_back(q.id, std::move(tokens), std::move(old), reward);
  }
  return out;
}

void accumulate_logprob_gradient(const PolicyParams& params, const Question& q, int position,
                                 int token, double coef, ParamTensor& grad) {
  if (token < 0 || token >= params.vocab()) throw std::invalid_argument("token out of vocabulary");
  Eigen::VectorXd dz = -position_logprobs(params, q, position).array().exp().matrix();
  dz[token] += 1.0;
  grad[static_cast<std::size_t>(position)].noalias() +=
      (coef / params.temperature) * dz * q.features.transpose();
}

ParamTensor logprob_gradient(const PolicyParams& params, const Question& q,
                             std::span<const int> tokens) {
  check_tokens(tokens, q, params.vocab());
  ParamTensor grad = zeros_like(params);
  for (std::size_t t = 0; t < tokens.size(); ++t)
    accumulate_logprob_gradient(params, q, static_cast<int>(t), tokens[t], 1.0, grad);
  return grad;
}

}  // namespace fgexpo
