#pragma once

// Backward information filter. lik[k][z] is a list of quadratic likelihood
// components whose sum is p(y_{k:N} | x_k, z_k) (0-based k), and lik[N] is
// the uninformative terminal likelihood (one r = s = L = 0 component per mode).
// Every constant, including transition log-probabilities, is carried in r, so
// component evaluation is exact.

#include <vector>

#include "jmls/mixture.hpp"
#include "jmls/model.hpp"
#include "jmls/simulate.hpp"

namespace jmls {

struct BifOptions {
  std::size_t budget = kUnbounded;
  ReductionOptions reduction;
};

struct BifOutput {
  std::vector<LikelihoodMixture> lik;  // size N + 1
};

/// N(y | C x + D u, R) written as a quadratic likelihood in x.
LikelihoodComponent bif_init(const ModeParams& mode, const Vector& u, const Vector& y);

/// Integrates x' ~ N(A_k x + b, Q_k) against one likelihood component in x'.
/// The result is a likelihood in x (T is not applied).
LikelihoodComponent marginalize_dynamics(const LikelihoodComponent& next, const TransformedMode& tm, const Vector& b);

/// p(y_{k:N} | x_k, z_k) from p(y_{k+1:N} | x_{k+1}, z_{k+1}).
LikelihoodMixture bif_step(const LikelihoodMixture& next, const JmlsModel& model,
                           const std::vector<TransformedMode>& transformed, const Vector& u_bar, const Vector& u,
                           const Vector& y, const BifOptions& options = {});

BifOutput run_bif(const JmlsModel& model, const Dataset& data, const BifOptions& options = {});

}  // namespace jmls
