#pragma once

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "fgexpo/core.hpp"
#include "fgexpo/rng.hpp"
#include "fgexpo/testbed.hpp"

namespace fgexpo {

/// EMA-smoothed pass rate per question, in bank order.
class PassRateTable {
 public:
  /// Every entry starts at 0.5.
  static PassRateTable fresh(const QuestionBank& bank);
  PassRateTable(std::vector<QuestionId> ids, std::vector<double> values, long step);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  long step() const { return step_; }
  const std::vector<QuestionId>& ids() const { return ids_; }
  const std::vector<double>& values() const { return values_; }
  double at(QuestionId id) const { return values_[index_of(id)]; }
  std::size_t index_of(QuestionId id) const;

  bool operator==(const PassRateTable& o) const {
    return ids_ == o.ids_ && values_ == o.values_ && step_ == o.step_;
  }

 private:
  friend PassRateTable apply_step_updates(const PassRateTable&, std::span<const GroupResult>,
                                          double);
  std::vector<QuestionId> ids_;
  std::vector<double> values_;
  std::unordered_map<QuestionId, std::size_t> index_;
  long step_ = 0;
};

/// Unnormalized Gaussian kernel weights over the table, aligned with ids.
/// log_weights is exact; weights may underflow to 0 for very narrow kernels.
struct CurriculumWeights {
  std::vector<QuestionId> ids;
  std::vector<double> log_weights;
  std::vector<double> weights;
  double normalizer = 0.0;
};

double ema_update(double p_prev, double p_emp, double alpha);

/// EMA-updates each sampled question; others keep their value. step += 1.
PassRateTable apply_step_updates(const PassRateTable& table, std::span<const GroupResult> groups,
                                 double alpha);

double gaussian_weight(double p_tilde, double mu_c, double sigma_c);

CurriculumWeights compute_weights(const PassRateTable& table, double mu_c, double sigma_c);
/// All weights 1: the plain uniform sampler over the same table.
CurriculumWeights uniform_weights(const PassRateTable& table);

/// Single-draw distribution w_q / Z, computed in log space.
std::vector<double> selection_probabilities(const CurriculumWeights& weights);

/// batch_size distinct ids in draw order. Equivalent to sequential draws
/// proportional to weight, renormalized over the questions not yet drawn
/// (Gumbel-top-k over log weights; one pass over the table).
std::vector<QuestionId> sample_batch(const CurriculumWeights& weights, int batch_size,
                                     RandomStream& rng);

/// One row of the curriculum trace for one question at one step.
struct CurriculumTraceRow {
  long step = 0;
  QuestionId question_id = 0;
  std::optional<double> p_emp;  // empty when not sampled
  double p_tilde_after = 0.0;
  double weight = 0.0;
  bool sampled = false;
};

/// Rows for every question at one step: the weight used to draw this step's
/// batch and the table after this step's updates.
std::vector<CurriculumTraceRow> curriculum_trace_rows(long step, const CurriculumWeights& weights,
                                                      const PassRateTable& table_after,
                                                      std::span<const GroupResult> groups);

}  // namespace fgexpo
