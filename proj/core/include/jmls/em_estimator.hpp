#pragma once

// Expectation maximisation for JMLS parameters with square-root statistics.
//
// The combined expectation for mode z is accumulated as an upper factor
// M_half(z) over the stacked vector [x_k; x_{k+1}; u_k; y_k]. Under the
// classic convention the measurement parameters use the z_k-weighted
// statistics over k = 1..N and the dynamics parameters a second set weighted
// by z_{k+1}, stacked as [x_k; x_{k+1}; u_{k+1}; y_k] over k = 1..N-1.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "jmls/joint_smoother.hpp"

namespace jmls {

/// Square-root factor of E[v v^T] for v = [chi; u; y], chi ~ N(mu, P).
UtFactor component_sqrt_expectation(const Vector& mu, const UtFactor& P_half, const Vector& u, const Vector& y);

struct SuffStats {
  Index nx = 0, nu = 0, ny = 0;
  Convention convention = Convention::dynamic;
  /// Sum of z_k weights over k = 1..N.
  std::vector<double> c_m;
  std::vector<UtFactor> M_half;
  /// Classic convention only: z_{k+1}-weighted dynamics statistics.
  std::vector<double> c_dyn;
  std::vector<UtFactor> M_half_dyn;
  /// transitions(j, i) = expected number of i -> j transitions.
  Matrix transitions;
};

struct StatBlocks {
  Matrix Sigma;  // E[[x; u][x; u]^T]
  Matrix Phi;    // E[[y; x+][y; x+]^T]
  Matrix Psi;    // E[[y; x+][x; u]^T]
};

/// Selector matrices picking [x_k; u_k] (T1) and [y_k; x_{k+1}] (T2).
Matrix selector_T1(Index nx, Index nu, Index ny);
Matrix selector_T2(Index nx, Index nu, Index ny);

StatBlocks read_stats(const UtFactor& M_half, Index nx, Index nu, Index ny);

SuffStats accumulate_stats(const std::vector<JointSmoothedMixture>& joint, const Dataset& data, const JmlsModel& model);

struct FreezeFlags {
  bool gamma = false;
  bool pi = false;
  bool T = false;
  bool prior = false;
};

struct MStepOptions {
  FreezeFlags freeze;
  /// Lower bound applied to T entries before renormalisation (0 = off).
  double eps_T = 0.0;
  double degenerate_ratio = 1e-8;
  double ridge_condition = 1e12;
};

struct MStepResult {
  JmlsModel model;
  std::vector<std::string> warnings;
};

/// Gamma = Psi Sigma^{-1} through the factor of Sigma; ridge regularised when
/// cond(Sigma) exceeds opts.ridge_condition.
Matrix solve_gamma(const UtFactor& M_half, Index nx, Index nu, Index ny, double ridge_condition,
                   std::vector<std::string>* warnings = nullptr);

/// Pi^{1/2} = qless_qr(M_half W / sqrt(c)) with W mapping the stacked vector
/// to the residual [y - C x - D u; x+ - A x - B u].
UtFactor pi_factor(const UtFactor& M_half, double c, const ModeParams& gamma_params);

MStepResult mstep(const SuffStats& stats, const HybridMixture& smoothed_prior, const JmlsModel& current,
                  const MStepOptions& opts = {});

struct EStepOptions {
  std::size_t filter_budget = kUnbounded;
  std::size_t bif_budget = kUnbounded;
  std::size_t smoother_budget = kUnbounded;
  ReductionOptions reduction;
  unsigned threads = 1;
};

struct EStepResult {
  FilterOutput filter;
  BifOutput bif;
  std::vector<JointSmoothedMixture> joint;
  SuffStats stats;
  HybridMixture smoothed_prior;
};

EStepResult e_step(const JmlsModel& model, const Dataset& data, const EStepOptions& opts = {});

struct EmConfig {
  EStepOptions estep;
  MStepOptions mstep;
  int max_iter = 100;
  /// Stop when the log-likelihood improves by less than eps for `patience`
  /// consecutive iterations.
  double eps = 1e-6;
  int patience = 1;
  /// Keep T fixed until the improvement stays below delta_T for T_patience
  /// consecutive iterations.
  bool stage_T = true;
  double delta_T = 0.03;
  int T_patience = 10;
  /// Called after every iteration with the iterate just recorded.
  std::function<void(const struct EmIterate&)> on_iterate;
};

struct EmIterate {
  int iteration = 0;
  JmlsModel model;
  double loglik = 0.0;
  double wall_ms = 0.0;
  bool T_enabled = false;
};

struct EmResult {
  /// trace[i] holds model_i and its log-likelihood; the last entry is the
  /// returned model.
  std::vector<EmIterate> trace;
  JmlsModel model;
  double final_loglik = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;
};

EmResult run_em(const JmlsModel& model0, const Dataset& data, const EmConfig& config = {});

}  // namespace jmls
