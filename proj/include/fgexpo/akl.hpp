#pragma once

#include <span>

#include "fgexpo/core.hpp"

namespace fgexpo {

/// Monotone, two-sided bounded map from batch accuracy to a KL scale.
class RhoFunction {
 public:
  explicit RhoFunction(RhoVariant variant);

  static RhoFunction tanh_shifted() { return RhoFunction(RhoVariant::tanh_shifted()); }
  static RhoFunction constant(double c) { return RhoFunction(RhoVariant::constant_value(c)); }

  const RhoVariant& variant() const { return variant_; }
  double rho_min() const { return rho_min_; }
  double rho_max() const { return rho_max_; }

  /// (tanh(x) + 1) / 2, or the constant. x must lie in [0,1].
  double operator()(double x) const;

 private:
  RhoVariant variant_;
  double rho_min_;
  double rho_max_;
};

double rho_eval(const RhoFunction& f, double x);

/// beta * rho(acc).
double beta_effective(double beta, const BatchAccuracy& acc, const RhoFunction& f);

/// Pooled accuracy over every rollout of every group (N = |B| * G).
BatchAccuracy batch_mean_accuracy(std::span<const GroupResult> groups);

}  // namespace fgexpo
