#include "jmls/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace jmls {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SingularR: return "SingularR";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::ModeCountMismatch: return "ModeCountMismatch";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::DegenerateInnovation: return "DegenerateInnovation";
    case ErrorCode::SingularPredCov: return "SingularPredCov";
    case ErrorCode::LambdaOverflow: return "LambdaOverflow";
    case ErrorCode::DegenerateMode: return "DegenerateMode";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidModel:
    case ErrorCode::Parse:
    case ErrorCode::Io:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ModeCountMismatch:
      return false;
    default:
      return true;
  }
}

UtFactor::UtFactor(Matrix upper) : f_(std::move(upper)) {
  if (f_.rows() != f_.cols()) {
    std::ostringstream os;
    os << "UtFactor must be square, got " << f_.rows() << "x" << f_.cols();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  const Index n = f_.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) f_(i, j) = 0.0;
  }
  for (Index i = 0; i < n; ++i) {
    if (f_(i, i) < 0.0) f_.row(i) *= -1.0;
  }
}

Matrix UtFactor::gram() const { return f_.transpose() * f_; }

double UtFactor::log_det() const {
  double acc = 0.0;
  for (Index i = 0; i < f_.rows(); ++i) acc += std::log(f_(i, i));
  return 2.0 * acc;
}

double UtFactor::diag_ratio() const {
  if (f_.rows() == 0) return 0.0;
  const Vector d = f_.diagonal();
  const double hi = d.maxCoeff();
  if (hi <= 0.0) return 0.0;
  return d.minCoeff() / hi;
}

Vector UtFactor::solve_transposed(const Vector& b) const {
  return f_.transpose().triangularView<Eigen::Lower>().solve(b);
}

Vector UtFactor::solve(const Vector& b) const {
  return f_.triangularView<Eigen::Upper>().solve(b);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

namespace {

// Upper Cholesky tolerant of semidefinite input: pivots in [-fail_tol, zero_tol]
// produce a zero row. Returns nullopt on a pivot below -fail_tol.
std::optional<Matrix> cholesky_upper(const Matrix& m, double zero_tol, double fail_tol) {
  const Index n = m.rows();
  Matrix f = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    const double d = m(j, j) - f.col(j).head(j).squaredNorm();
    if (d > zero_tol) {
      const double root = std::sqrt(d);
      f(j, j) = root;
      for (Index c = j + 1; c < n; ++c) {
        f(j, c) = (m(j, c) - f.col(j).head(j).dot(f.col(c).head(j))) / root;
      }
    } else if (d < -fail_tol || !std::isfinite(d)) {
      return std::nullopt;
    }
  }
  return f;
}

}  // namespace

UtFactor chol_upper(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "chol_upper requires a square matrix");
  }
  const Index n = m.rows();
  if (n == 0) return UtFactor(Matrix(0, 0));
  const Matrix sym = symmetrize(m);
  const double scale = sym.norm();
  if (!std::isfinite(scale)) throw Error(ErrorCode::NotPsd, "non-finite entries");
  const double eps = std::numeric_limits<double>::epsilon();
  const double zero_tol = 16.0 * static_cast<double>(n) * eps * scale;

  if (auto f = cholesky_upper(sym, zero_tol, zero_tol)) return UtFactor(std::move(*f));

  Matrix jittered = sym;
  jittered.diagonal().array() += 1e-12 * sym.trace() / static_cast<double>(n);
  if (auto f = cholesky_upper(jittered, zero_tol, 1e-8 * scale)) return UtFactor(std::move(*f));

  std::ostringstream os;
  os << "matrix of size " << n << " is not positive semidefinite (norm " << scale << ")";
  throw Error(ErrorCode::NotPsd, os.str());
}

UtFactor qless_qr(const Matrix& s) {
  const Index n = s.cols();
  if (n == 0) return UtFactor(Matrix(0, 0));
  if (s.rows() == 0) return UtFactor::zero(n);
  if (s.rows() < n) {
    Matrix padded = Matrix::Zero(n, n);
    padded.topRows(s.rows()) = s;
    return qless_qr(padded);
  }
  Eigen::HouseholderQR<Matrix> qr(s);
  Matrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  return UtFactor(std::move(r));
}

UtFactor weighted_stack_qr(std::span<const WeightedBlock> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::EmptyInput, "weighted_stack_qr needs at least one block");
  const Index cols = blocks.front().factor.cols();
  Index rows = 0;
  for (const auto& b : blocks) {
    if (b.factor.cols() != cols) {
      throw Error(ErrorCode::DimensionMismatch, "weighted_stack_qr blocks differ in column count");
    }
    if (!(b.weight >= 0.0) || !std::isfinite(b.weight)) {
      throw Error(ErrorCode::NotPsd, "weighted_stack_qr weights must be finite and nonnegative");
    }
    rows += b.factor.rows();
  }
  Matrix stack(rows, cols);
  Index at = 0;
  for (const auto& b : blocks) {
    stack.middleRows(at, b.factor.rows()) = std::sqrt(b.weight) * b.factor;
    at += b.factor.rows();
  }
  return qless_qr(stack);
}

QrAccumulator::QrAccumulator(Index cols) : cols_(cols), buffer_(Matrix::Zero(6 * std::max<Index>(cols, 1), cols)) {}

void QrAccumulator::add(double weight, const Matrix& factor) {
  if (factor.cols() != cols_) {
    throw Error(ErrorCode::DimensionMismatch, "QrAccumulator block has the wrong column count");
  }
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw Error(ErrorCode::NotPsd, "QrAccumulator weights must be finite and nonnegative");
  }
  if (weight == 0.0 || factor.rows() == 0) return;
  if (used_ + factor.rows() > buffer_.rows()) {
    compact();
    if (used_ + factor.rows() > buffer_.rows()) {
      buffer_.conservativeResize(used_ + factor.rows() + cols_, Eigen::NoChange);
    }
  }
  buffer_.middleRows(used_, factor.rows()) = std::sqrt(weight) * factor;
  used_ += factor.rows();
}

void QrAccumulator::merge(const QrAccumulator& other) { add(1.0, other.finish().matrix()); }

void QrAccumulator::compact() {
  if (used_ <= cols_) return;
  const UtFactor r = qless_qr(buffer_.topRows(used_));
  buffer_.topRows(cols_) = r.matrix();
  used_ = cols_;
}

UtFactor QrAccumulator::finish() const {
  if (used_ == 0) return UtFactor::zero(cols_);
  return qless_qr(buffer_.topRows(used_));
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptyInput, "logsumexp of an empty list");
  const double hi = *std::max_element(v.begin(), v.end());
  if (v.size() == 1) return v.front();
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  if (hi == std::numeric_limits<double>::infinity()) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

}  // namespace jmls
