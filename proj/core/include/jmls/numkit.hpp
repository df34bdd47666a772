#pragma once

// Square-root linear algebra shared by the estimation modules. Every
// covariance-like quantity in the library is carried as an upper-triangular
// factor F with F^T F = M.

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "jmls/error.hpp"

namespace jmls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Upper-triangular factor F of a symmetric PSD matrix M = F^T F.
///
/// Construction zeroes the strictly lower part and flips the sign of any row
/// whose diagonal entry is negative, so the stored factor always has a
/// nonnegative diagonal. Row sign flips leave F^T F unchanged.
class UtFactor {
 public:
  UtFactor() = default;
  explicit UtFactor(Matrix upper);

  static UtFactor zero(Index n) { return UtFactor(Matrix::Zero(n, n)); }
  static UtFactor identity(Index n) { return UtFactor(Matrix::Identity(n, n)); }

  const Matrix& matrix() const noexcept { return f_; }
  Index dim() const noexcept { return f_.rows(); }

  /// F^T F.
  Matrix gram() const;

  /// ln|F^T F| = 2 sum ln F_ii; -inf when singular.
  double log_det() const;

  /// Smallest diagonal entry relative to the largest (0 for an empty factor).
  double diag_ratio() const;

  /// Solves F^T x = b.
  Vector solve_transposed(const Vector& b) const;
  /// Solves F x = b.
  Vector solve(const Vector& b) const;

 private:
  Matrix f_;
};

/// Upper Cholesky factor of a symmetric PSD matrix. Positive-semidefinite input
/// yields zero rows; a pivot failure triggers one retry with diagonal jitter
/// of 1e-12 * trace(M) / n before NotPsd is thrown.
UtFactor chol_upper(const Matrix& m);

/// R factor of a Q-less QR decomposition: R^T R = S^T S, R is n x n for an
/// m x n input. Inputs with fewer rows than columns are zero-padded.
UtFactor qless_qr(const Matrix& s);

struct WeightedBlock {
  double weight = 1.0;
  Matrix factor;
};

/// Factor C with C^T C = sum_i w_i F_i^T F_i, via one QR of the stack of
/// sqrt(w_i) F_i.
UtFactor weighted_stack_qr(std::span<const WeightedBlock> blocks);

/// Streaming version of weighted_stack_qr. Rows are buffered and compacted
/// with a QR whenever the buffer exceeds a fixed multiple of the column count,
/// so the result depends only on the order of add() calls.
class QrAccumulator {
 public:
  explicit QrAccumulator(Index cols);

  void add(double weight, const Matrix& factor);
  void merge(const QrAccumulator& other);
  UtFactor finish() const;
  Index cols() const noexcept { return cols_; }

 private:
  void compact();

  Index cols_;
  Matrix buffer_;
  Index used_ = 0;
};

/// log(sum exp(v_i)) with max-shift; entries may be -inf.
double logsumexp(std::span<const double> v);

/// Symmetric part (M + M^T) / 2.
Matrix symmetrize(const Matrix& m);

}  // namespace jmls
