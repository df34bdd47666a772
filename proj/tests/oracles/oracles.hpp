#pragma once

// Reference implementations used only by the tests. Everything here works on
// dense covariances in long double and shares no code path with the
// square-root library beyond the model and dataset types.

#include <vector>

#include "jmls/em_estimator.hpp"

namespace jmls::oracle {

using Real = long double;
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

RMatrix to_real(const Matrix& m);
RVector to_real(const Vector& v);
Matrix to_double(const RMatrix& m);
Vector to_double(const RVector& v);

/// Gaussian posterior of the stacked states X = [x_1; ...; x_{N+1}] given
/// y_{1:N} for one fixed mode path z_{1:N+1} and one prior component.
struct Branch {
  std::vector<std::size_t> path;  // length N + 1
  Real log_joint = 0;             // ln prior weight + ln path prob + ln p(y | path)
  Real log_evidence = 0;          // ln p(y | path, prior component)
  RVector mean;                   // (N+1) nx
  RMatrix cov;
  Real weight = 0;                // normalised posterior probability
};

/// Builds [X; Y] = offset + G n with n ~ N(0, I) and conditions on y.
Branch condition_on_path(const JmlsModel& model, const Dataset& data, const std::vector<std::size_t>& path,
                         std::size_t prior_component);

/// All m^{N+1} paths times all prior components of the starting mode.
struct Enumeration {
  std::vector<Branch> branches;
  Real loglik = 0;
};
Enumeration enumerate(const JmlsModel& model, const Dataset& data);

/// Posterior probability of (z_k = i, z_{k+1} = j) and the pairwise moments
/// E[chi chi^T] and E[chi], chi = [x_k; x_{k+1}], restricted to that pair.
struct PairMoments {
  Real prob = 0;
  RVector first;   // sum of weight * mean
  RMatrix second;  // sum of weight * (cov + mean mean^T)
};
PairMoments pair_moments(const Enumeration& e, Index nx, Index k, std::size_t i, std::size_t j);

/// Same quantities aggregated from a joint smoothed mixture.
PairMoments pair_moments(const JointSmoothedMixture& joint, std::size_t i, std::size_t j);

/// Dense M-step from any joint smoothed mixtures (Gamma = Psi Sigma^{-1},
/// Pi from the closed-form residual expression, T from pair weights).
struct DenseMStep {
  std::vector<RMatrix> Sigma, Phi, Psi, Gamma, Pi;
  std::vector<Real> c_m;
  RMatrix T;
};
DenseMStep dense_mstep(const std::vector<JointSmoothedMixture>& joint, const Dataset& data, const JmlsModel& model);

/// One textbook EM iteration for a single-mode model with correlated noise,
/// computed from the exact joint posterior.
struct DenseEmStep {
  Real loglik = 0;
  RVector smoothed_mean;  // (N+1) nx
  RMatrix smoothed_cov;
  JmlsModel updated;
};
DenseEmStep dense_em_step(const JmlsModel& model, const Dataset& data);

/// Q(theta, theta') = E[ln p_theta(x_{1:N+1}, z_{1:N+1}, y) | y, theta'] with
/// the posterior given by an enumeration under theta'. The prior term is
/// integrated numerically, so nx must be 1.
Real q_function(const JmlsModel& theta, const Enumeration& posterior, const Dataset& data);

/// Aggregate per-mode moments of a hybrid mixture (weight, mean, second moment).
struct ModeMoments {
  Real weight = 0;
  RVector first;
  RMatrix second;
};
std::vector<ModeMoments> mode_moments(const HybridMixture& mix);

}  // namespace jmls::oracle
