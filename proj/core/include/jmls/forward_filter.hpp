#pragma once

// Gaussian-sum forward filter. Each step corrects with y_k using the
// original C, D, R of mode z_k, reduces the filtered mixture to the budget,
// then predicts through the decorrelated dynamics of dynamics_mode(z_k, z_{k+1})
// driven by transition_input().

#include <vector>

#include "jmls/mixture.hpp"
#include "jmls/model.hpp"
#include "jmls/simulate.hpp"

namespace jmls {

struct FilterOptions {
  std::size_t budget = kUnbounded;
  ReductionOptions reduction;
};

struct FilterOutput {
  /// predicted[k] = p(x_k, z_k | y_{1:k-1}); predicted[0] is the prior.
  std::vector<HybridMixture> predicted;
  /// filtered[k] = p(x_k, z_k | y_{1:k}) after reduction, normalized.
  std::vector<HybridMixture> filtered;
  /// ln p(y_k | y_{1:k-1}).
  std::vector<double> step_loglik;
  double log_likelihood = 0.0;
  /// Filtered component count before reduction.
  std::vector<std::size_t> component_counts;
};

struct Correction {
  HybridMixture posterior;
  double log_normalizer;
};

/// Measurement update of every component with y_k; the returned posterior is
/// normalized and log_normalizer = ln sum of the updated weights.
Correction correct(const HybridMixture& predicted, const JmlsModel& model, const Vector& u, const Vector& y);

/// Square-root update of one Gaussian with one mode's measurement model;
/// adds ln N(y | C mu + D u, C P C^T + R) to log_w.
GaussianComponent correct_component(const GaussianComponent& c, const ModeParams& mode, const Vector& u,
                                    const Vector& y);

/// Time update x_k -> x_{k+1} for all mode pairs, without reduction.
HybridMixture predict(const HybridMixture& filtered, const JmlsModel& model,
                      const std::vector<TransformedMode>& transformed, const Vector& u_bar);

FilterOutput run_filter(const JmlsModel& model, const Dataset& data, const FilterOptions& options = {});

}  // namespace jmls
