#include "fgexpo/akl.hpp"

#include <cmath>
#include <stdexcept>

namespace fgexpo {

RhoFunction::RhoFunction(RhoVariant variant) : variant_(variant), rho_min_(0.0), rho_max_(0.0) {
  switch (variant_.kind) {
    case RhoKind::kTanhShifted:
      rho_min_ = 0.5;
      rho_max_ = (std::tanh(1.0) + 1.0) / 2.0;
      break;
    case RhoKind::kConstant:
      if (!(variant_.constant > 0.0) || !std::isfinite(variant_.constant))
        throw std::invalid_argument("constant rho must be positive and finite");
      rho_min_ = rho_max_ = variant_.constant;
      break;
  }
}

double RhoFunction::operator()(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("rho argument must lie in [0,1]");
  if (variant_.kind == RhoKind::kConstant) return variant_.constant;
  return (std::tanh(x) + 1.0) / 2.0;
}

double rho_eval(const RhoFunction& f, double x) { return f(x); }

double beta_effective(double beta, const BatchAccuracy& acc, const RhoFunction& f) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  return beta * f(acc.value());
}

BatchAccuracy batch_mean_accuracy(std::span<const GroupResult> groups) {
  if (groups.empty()) throw std::invalid_argument("batch accuracy of an empty batch");
  long successes = 0;
  long n = 0;
  for (const auto& g : groups) {
    for (const auto& r : g.rollouts()) successes += r.reward();
    n += static_cast<long>(g.size());
  }
  return BatchAccuracy::from_counts(successes, n);
}

}  // namespace fgexpo
