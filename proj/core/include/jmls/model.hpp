#pragma once

// Jump Markov linear system model:
//
//   x_{k+1} = A(z_k) x_k + B(z_k) u_k + v_k(z_k)
//   y_k     = C(z_k) x_k + D(z_k) u_k + e_k(z_k)
//   [e_k; v_k] ~ N(0, Pi(z_k)),  Pi = [[R, S^T], [S, Q]]
//
// with a hidden Markov chain z_k on 0..m-1 governed by the column-stochastic
// matrix T(j, i) = P(z_{k+1} = j | z_k = i).
//
// The `classic` convention instead has z_k select the transition *into* x_k:
//
//   x_{k+1} = A(z_{k+1}) x_k + B(z_{k+1}) u_{k+1} + v(z_{k+1}),
//   y_k     = C(z_k) x_k + D(z_k) u_k + e_k(z_k),
//
// with S = 0. Every estimator handles it through dynamics_mode() and the
// transition input chosen by transition_input().

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jmls/mixture.hpp"
#include "jmls/numkit.hpp"

namespace jmls {

enum class Convention { dynamic, classic };

std::string to_string(Convention c);
Convention convention_from_string(const std::string& s);

/// Mode whose dynamics drive x_k -> x_{k+1} for the pair (z_k = from, z_{k+1} = to).
inline std::size_t dynamics_mode(Convention c, std::size_t from, std::size_t to) {
  return c == Convention::dynamic ? from : to;
}

struct ModeParams {
  Matrix A, B, C, D;
  /// Upper factor of Pi = [[R, S^T], [S, Q]], measurement block first.
  UtFactor Pi_half;

  Index nx() const { return A.rows(); }
  Index nu() const { return B.cols(); }
  Index ny() const { return C.rows(); }

  /// [[C, D], [A, B]].
  Matrix Gamma() const;
  Matrix Pi() const { return Pi_half.gram(); }
  Matrix R() const;
  Matrix Q() const;
  Matrix S() const;

  static ModeParams from_covariances(Matrix A, Matrix B, Matrix C, Matrix D, const Matrix& Q, const Matrix& R,
                                     const Matrix& S);
  static ModeParams from_gamma(const Matrix& gamma, Index nx, Index nu, Index ny, UtFactor Pi_half);
};

struct JmlsModel {
  Index nx = 0, nu = 0, ny = 0;
  Convention convention = Convention::dynamic;
  std::vector<ModeParams> modes;
  Matrix T;
  HybridMixture prior;

  std::size_t m() const { return modes.size(); }
};

/// Time-invariant part of the decorrelated system for one mode. The state
/// transition input is u_bar = [u; y] with offset b = B_k u_bar.
struct TransformedMode {
  Matrix A_k;  // A - Kbar C
  Matrix B_k;  // [B - Kbar D, Kbar]
  Matrix C_k;  // C
  Matrix D_k;  // [D, 0]
  Matrix Kbar;
  UtFactor Q_half;
  UtFactor R_half;
  Matrix H;  // upper-right block of Pi_half

  Vector offset(const Vector& u_bar) const { return B_k * u_bar; }
};

std::vector<std::string> validate(const JmlsModel& model);

TransformedMode transform_mode(const ModeParams& mode);
std::vector<TransformedMode> transform_modes(const JmlsModel& model);

/// Similarity transform x -> Tr x applied to every mode and the prior.
JmlsModel apply_state_transform(const JmlsModel& model, const Matrix& Tr);

using ComplexMatrix = Eigen::MatrixXcd;

/// H(e^{jw}) = C (e^{jw} I - A)^{-1} B + D for each frequency (rad/sample).
std::vector<ComplexMatrix> frequency_response(const ModeParams& mode, const std::vector<double>& freqs);

/// n log-spaced frequencies in [lo, hi].
std::vector<double> log_frequency_grid(std::size_t n, double lo = 1e-3, double hi = 3.141592653589793);

struct ModeMatch {
  /// permutation[z_truth] = z_estimated.
  std::vector<std::size_t> permutation;
  double total_error = 0.0;
  /// Squared magnitude-response error of each truth mode against its match.
  std::vector<double> per_mode_error;
};

/// Squared l2 distance between the magnitude responses of two modes.
double bode_magnitude_error(const ModeParams& a, const ModeParams& b, const std::vector<double>& freqs);

/// Exhaustive search over mode permutations (m <= 8); ties go to the
/// lexicographically smallest permutation.
ModeMatch match_modes(const JmlsModel& estimated, const JmlsModel& truth, const std::vector<double>& freqs);

/// Random stable model: each mode has spectral radius < 1 (rejection
/// sampling), Pi is random PSD with a positive-definite R block and T is
/// random column-stochastic. Deterministic per seed.
JmlsModel random_model(Index nx, Index nu, Index ny, std::size_t m, std::uint64_t seed,
                       Convention convention = Convention::dynamic);

/// Prior with one N(mean, cov) component per mode and equal weights.
HybridMixture uniform_prior(std::size_t m, const Vector& mean, const Matrix& cov);

double spectral_radius(const Matrix& A);

}  // namespace jmls
