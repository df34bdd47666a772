#pragma once

// Pairwise joint smoother: fuses the filtered mixture at k with the backward
// likelihood at k+1 into p(x_k, x_{k+1}, z_k, z_{k+1} | y_{1:N}) over the
// stacked state chi_k = [x_k; x_{k+1}].

#include <vector>

#include "jmls/backward_filter.hpp"
#include "jmls/forward_filter.hpp"

namespace jmls {

struct SmootherOptions {
  /// Components kept per (z_k, z_{k+1}) pair after fusion.
  std::size_t budget = kUnbounded;
  /// Components with normalized log-weight below this are dropped.
  double drop_log_weight = -46.0;
  ReductionOptions reduction;
  unsigned threads = 1;
};

struct JointSmoothedMixture {
  std::size_t m = 0;
  /// pairs[i * m + j] holds the components with z_k = i, z_{k+1} = j.
  std::vector<std::vector<GaussianComponent>> pairs;

  std::vector<GaussianComponent>& pair(std::size_t i, std::size_t j) { return pairs[i * m + j]; }
  const std::vector<GaussianComponent>& pair(std::size_t i, std::size_t j) const { return pairs[i * m + j]; }
  /// ln P(z_k = i, z_{k+1} = j | y).
  double log_pair_weight(std::size_t i, std::size_t j) const;
};

struct JointPrediction {
  Vector mu;        // [mu; A_k mu + b]
  UtFactor P_half;  // [[P^{1/2}, P^{1/2} A_k^T], [0, Q_k^{1/2}]]
};

JointPrediction joint_predict(const GaussianComponent& filtered, const TransformedMode& tm, const Vector& b);

/// Unnormalized fusion of a joint prediction with a backward likelihood on
/// x_{k+1}. log_w = ln w_filtered + ln T + ln integral of the product.
GaussianComponent fuse(const JointPrediction& pred, const LikelihoodComponent& lik, double log_w_filtered,
                       double log_T);

JointSmoothedMixture smooth_step(const HybridMixture& filtered, const LikelihoodMixture& next_lik,
                                 const JmlsModel& model, const std::vector<TransformedMode>& transformed,
                                 const Vector& u_bar, const SmootherOptions& options = {});

/// Joint smoothed mixtures for k = 0..N-1.
std::vector<JointSmoothedMixture> run_smoother(const JmlsModel& model, const Dataset& data,
                                               const FilterOutput& filter, const BifOutput& bif,
                                               const SmootherOptions& options = {});

/// Marginal over (x_{k+1}, z_{k+1}) of a joint mixture, reduced per mode.
HybridMixture marginal_first(const JointSmoothedMixture& joint, std::size_t budget = kUnbounded,
                             const ReductionOptions& reduction = {});
/// Marginal over (x_k, z_k) of a joint mixture, reduced per mode.
HybridMixture marginal_second(const JointSmoothedMixture& joint, std::size_t budget = kUnbounded,
                              const ReductionOptions& reduction = {});

/// p(x_1, z_1 | y_{1:N}) from the first joint mixture.
HybridMixture smoothed_prior(const JointSmoothedMixture& first, std::size_t budget = kUnbounded,
                             const ReductionOptions& reduction = {});

/// Two-filter marginal p(x_k, z_k | y_{1:N}) from the predicted mixture at k
/// and the backward likelihood at k, normalized.
HybridMixture combine_two_filter(const HybridMixture& predicted, const LikelihoodMixture& lik);

}  // namespace jmls
