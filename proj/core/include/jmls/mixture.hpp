#pragma once

// Hybrid Gaussian mixtures (per-mode component lists in log-weight,
// square-root-covariance form), quadratic likelihood mixtures, and
// Kullback-Leibler (Runnalls) mixture reduction.

#include <cstddef>
#include <limits>
#include <vector>

#include "jmls/numkit.hpp"

namespace jmls {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

struct GaussianComponent {
  double log_w = 0.0;
  Vector mu;
  UtFactor P_half;

  Matrix covariance() const { return P_half.gram(); }
};

/// p(x, z) = sum_z sum_i w_i(z) N(x | mu_i(z), P_i(z)); modes are 0-based.
class HybridMixture {
 public:
  HybridMixture() = default;
  explicit HybridMixture(std::size_t modes) : modes_(modes) {}

  std::size_t mode_count() const noexcept { return modes_.size(); }
  std::vector<GaussianComponent>& mode(std::size_t z) { return modes_.at(z); }
  const std::vector<GaussianComponent>& mode(std::size_t z) const { return modes_.at(z); }

  std::size_t component_count() const;
  /// log of the total mass, -inf when empty.
  double log_total() const;
  /// log of the mass assigned to mode z.
  double log_mode_weight(std::size_t z) const;

  /// Shift all log-weights so the mixture integrates to one; returns the
  /// subtracted log-normalizer.
  double normalize();

 private:
  std::vector<std::vector<GaussianComponent>> modes_;
};

/// L(x | r, s, L) = exp(-1/2 (r + 2 x^T s + x^T L x)), with L = L_half^T L_half.
struct LikelihoodComponent {
  double r = 0.0;
  Vector s;
  UtFactor L_half;

  double log_eval(const Vector& x) const;
  static LikelihoodComponent uninformative(Index n);
};

using LikelihoodMixture = std::vector<std::vector<LikelihoodComponent>>;

struct ReductionOptions {
  /// Components lighter than log(total) - prune_log_ratio are dropped before
  /// pairwise merging.
  double prune_log_ratio = 46.0;
  /// A likelihood component counts as positive definite (and is eligible for
  /// merging) when min/max of its factor diagonal exceeds this.
  double pd_diag_ratio = 1e-6;
};

/// Runnalls upper bound on the KL cost of merging two components.
double runnalls_cost(const GaussianComponent& a, const GaussianComponent& b);

/// Moment-matched merge; the result carries the summed weight.
GaussianComponent merge_moments(const GaussianComponent& a, const GaussianComponent& b);

/// Greedy pairwise Runnalls reduction until at most `budget` components remain.
std::vector<GaussianComponent> reduce(std::vector<GaussianComponent> components, std::size_t budget,
                                      const ReductionOptions& opts = {});

/// Reduces every mode of a hybrid mixture independently.
void reduce_per_mode(HybridMixture& mix, std::size_t budget, const ReductionOptions& opts = {});

/// Converts a positive-definite likelihood component to an unnormalised
/// Gaussian (mass, mean, covariance) and back.
GaussianComponent likelihood_to_moment(const LikelihoodComponent& c);
LikelihoodComponent moment_to_likelihood(const GaussianComponent& g);
bool is_positive_definite(const LikelihoodComponent& c, const ReductionOptions& opts = {});

/// Runnalls reduction applied to the positive-definite subset in moment form;
/// rank-deficient components pass through untouched.
std::vector<LikelihoodComponent> reduce_likelihood(std::vector<LikelihoodComponent> components,
                                                   std::size_t budget, const ReductionOptions& opts = {});

/// Exact collapse of components that share s and L (within rel_tol):
/// r = -2 log(sum exp(-r_i / 2)).
std::vector<LikelihoodComponent> merge_identical_likelihoods(std::vector<LikelihoodComponent> components,
                                                             double rel_tol = 1e-12);

}  // namespace jmls
