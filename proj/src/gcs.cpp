#include "fgexpo/gcs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace fgexpo {

namespace {

void check_unit(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
}

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

PassRateTable PassRateTable::fresh(const QuestionBank& bank) {
  if (bank.empty()) throw std::invalid_argument("pass-rate table needs a non-empty bank");
  return PassRateTable(bank.ids(), std::vector<double>(bank.size(), 0.5), 0);
}

PassRateTable::PassRateTable(std::vector<QuestionId> ids, std::vector<double> values, long step)
    : ids_(std::move(ids)), values_(std::move(values)), step_(step) {
  if (ids_.size() != values_.size()) throw std::invalid_argument("pass-rate ids/values differ in size");
  if (step_ < 0) throw std::invalid_argument("pass-rate step must be non-negative");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    check_unit(values_[i], "smoothed pass rate");
    if (!index_.emplace(ids_[i], i).second)
      throw std::invalid_argument("duplicate question id in pass-rate table");
  }
}

std::size_t PassRateTable::index_of(QuestionId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("question " + std::to_string(id) + " not in pass-rate table");
  return it->second;
}

double ema_update(double p_prev, double p_emp, double alpha) {
  check_unit(p_prev, "previous pass rate");
  check_unit(p_emp, "empirical pass rate");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("EMA factor must lie in [0,1)");
  return std::clamp(alpha * p_prev + (1.0 - alpha) * p_emp, 0.0, 1.0);
}

PassRateTable apply_step_updates(const PassRateTable& table, std::span<const GroupResult> groups,
                                 double alpha) {
  PassRateTable out = table;
  std::unordered_set<QuestionId> seen;
  for (const auto& g : groups) {
    if (!seen.insert(g.question_id()).second)
      throw std::invalid_argument("question " + std::to_string(g.question_id()) +
                                  " appears twice in one batch");
    const std::size_t i = table.index_of(g.question_id());
    out.values_[i] = ema_update(table.values_[i], g.empirical_pass_rate(), alpha);
  }
  ++out.step_;
  return out;
}

double gaussian_weight(double p_tilde, double mu_c, double sigma_c) {
  if (!(sigma_c > 0.0)) throw std::invalid_argument("curriculum width must be positive");
  if (!(p_tilde >= 0.0 && p_tilde <= 1.0)) throw std::invalid_argument("pass rate outside [0,1]");
  const double d = p_tilde - mu_c;
  return std::exp(-(d * d) / (2.0 * sigma_c * sigma_c));
}

CurriculumWeights compute_weights(const PassRateTable& table, double mu_c, double sigma_c) {
  if (table.empty()) throw std::invalid_argument("cannot weight an empty table");
  if (!(sigma_c > 0.0)) throw std::invalid_argument("curriculum width must be positive");
  CurriculumWeights w;
  w.ids = table.ids();
  w.log_weights.reserve(table.size());
  w.weights.reserve(table.size());
  for (double p : table.values()) {
    const double d = p - mu_c;
    const double lw = -(d * d) / (2.0 * sigma_c * sigma_c);
    w.log_weights.push_back(lw);
    w.weights.push_back(std::exp(lw));
    w.normalizer += w.weights.back();
  }
  return w;
}

CurriculumWeights uniform_weights(const PassRateTable& table) {
  if (table.empty()) throw std::invalid_argument("cannot weight an empty table");
  CurriculumWeights w;
  w.ids = table.ids();
  w.log_weights.assign(table.size(), 0.0);
  w.weights.assign(table.size(), 1.0);
  w.normalizer = static_cast<double>(table.size());
  return w;
}

std::vector<double> selection_probabilities(const CurriculumWeights& weights) {
  if (weights.log_weights.empty()) throw std::invalid_argument("no weights");
  const double lz = log_sum_exp(weights.log_weights);
  std::vector<double> p;
  p.reserve(weights.log_weights.size());
  for (double lw : weights.log_weights) p.push_back(std::exp(lw - lz));
  return p;
}

std::vector<QuestionId> sample_batch(const CurriculumWeights& weights, int batch_size,
                                     RandomStream& rng) {
  const std::size_t n = weights.ids.size();
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (static_cast<std::size_t>(batch_size) > n)
    throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                " exceeds bank size " + std::to_string(n));
  if (weights.log_weights.size() != n) throw std::invalid_argument("weights/ids size mismatch");

  // Perturbing log-weights with i.i.d. Gumbel noise and keeping the top k
  // reproduces sequential renormalized draws without replacement.
  std::vector<double> keys(n);
  for (std::size_t i = 0; i < n; ++i)
    keys[i] = weights.log_weights[i] - std::log(-std::log(rng.uniform_open()));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto k = static_cast<std::ptrdiff_t>(batch_size);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&keys](std::size_t a, std::size_t b) {
                      return keys[a] > keys[b] || (keys[a] == keys[b] && a < b);
                    });
  std::vector<QuestionId> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (std::ptrdiff_t i = 0; i < k; ++i) out.push_back(weights.ids[order[static_cast<std::size_t>(i)]]);
  return out;
}

std::vector<CurriculumTraceRow> curriculum_trace_rows(long step, const CurriculumWeights& weights,
                                                      const PassRateTable& table_after,
                                                      std::span<const GroupResult> groups) {
  std::unordered_map<QuestionId, double> emp;
  for (const auto& g : groups) emp.emplace(g.question_id(), g.empirical_pass_rate());
  std::vector<CurriculumTraceRow> rows;
  rows.reserve(weights.ids.size());
  for (std::size_t i = 0; i < weights.ids.size(); ++i) {
    CurriculumTraceRow r;
    r.step = step;
    r.question_id = weights.ids[i];
    r.p_tilde_after = table_after.at(r.question_id);
    r.weight = weights.weights[i];
    if (auto it = emp.find(r.question_id); it != emp.end()) {
      r.p_emp = it->second;
      r.sampled = true;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace fgexpo
