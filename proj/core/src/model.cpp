#include "jmls/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jmls/random.hpp"

namespace jmls {

std::string to_string(Convention c) { return c == Convention::dynamic ? "dynamic" : "classic"; }

Convention convention_from_string(const std::string& s) {
  if (s == "dynamic") return Convention::dynamic;
  if (s == "classic") return Convention::classic;
  throw Error(ErrorCode::Parse, "unknown convention '" + s + "' (expected dynamic or classic)");
}

Matrix ModeParams::Gamma() const {
  Matrix g(ny() + nx(), nx() + nu());
  g << C, D, A, B;
  return g;
}

Matrix ModeParams::R() const { return Pi().topLeftCorner(ny(), ny()); }
Matrix ModeParams::Q() const { return Pi().bottomRightCorner(nx(), nx()); }
Matrix ModeParams::S() const { return Pi().bottomLeftCorner(nx(), ny()); }

ModeParams ModeParams::from_covariances(Matrix A, Matrix B, Matrix C, Matrix D, const Matrix& Q, const Matrix& R,
                                        const Matrix& S) {
  const Index nx = A.rows(), ny = C.rows();
  if (Q.rows() != nx || Q.cols() != nx || R.rows() != ny || R.cols() != ny || S.rows() != nx || S.cols() != ny) {
    throw Error(ErrorCode::DimensionMismatch, "Q must be n_x x n_x, R n_y x n_y and S n_x x n_y");
  }
  Matrix pi(ny + nx, ny + nx);
  pi << R, S.transpose(), S, Q;
  return ModeParams{std::move(A), std::move(B), std::move(C), std::move(D), chol_upper(pi)};
}

ModeParams ModeParams::from_gamma(const Matrix& gamma, Index nx, Index nu, Index ny, UtFactor Pi_half) {
  return ModeParams{gamma.bottomLeftCorner(nx, nx), gamma.bottomRightCorner(nx, nu), gamma.topLeftCorner(ny, nx),
                    gamma.topRightCorner(ny, nu), std::move(Pi_half)};
}

std::vector<std::string> validate(const JmlsModel& model) {
  std::vector<std::string> out;
  auto report = [&](const std::string& what) { out.push_back(what); };
  const Index nx = model.nx, nu = model.nu, ny = model.ny;
  const std::size_t m = model.m();
  if (m == 0) report("model has no modes");

  for (std::size_t z = 0; z < m; ++z) {
    const ModeParams& p = model.modes[z];
    const std::string tag = "mode " + std::to_string(z + 1) + ": ";
    auto shape = [&](const Matrix& M, Index r, Index c, const char* name) {
      if (M.rows() != r || M.cols() != c) {
        std::ostringstream os;
        os << tag << name << " is " << M.rows() << "x" << M.cols() << ", expected " << r << "x" << c;
        report(os.str());
        return false;
      }
      if (!M.allFinite()) {
        report(tag + name + " has non-finite entries");
        return false;
      }
      return true;
    };
    bool ok = shape(p.A, nx, nx, "A") & shape(p.B, nx, nu, "B") & shape(p.C, ny, nx, "C") & shape(p.D, ny, nu, "D");
    ok = shape(p.Pi_half.matrix(), ny + nx, ny + nx, "Pi_half") && ok;
    if (!ok) continue;
    const Matrix r_half = p.Pi_half.matrix().topLeftCorner(ny, ny);
    const double rmin = r_half.diagonal().minCoeff();
    const double rmax = r_half.diagonal().maxCoeff();
    if (!(rmin > 1e-12 * std::max(1.0, rmax))) {
      std::ostringstream os;
      os << tag << "R block of Pi is not positive definite (min factor diagonal " << rmin << ")";
      report(os.str());
    }
    if (model.convention == Convention::classic) {
      const double s_norm = p.S().norm();
      if (s_norm > 1e-12 * std::max(1.0, p.Pi().norm())) {
        std::ostringstream os;
        os << tag << "classic convention requires S = 0, |S| = " << s_norm;
        report(os.str());
      }
    }
  }

  if (model.T.rows() != static_cast<Index>(m) || model.T.cols() != static_cast<Index>(m)) {
    std::ostringstream os;
    os << "T is " << model.T.rows() << "x" << model.T.cols() << ", expected " << m << "x" << m;
    report(os.str());
  } else {
    for (Index i = 0; i < model.T.cols(); ++i) {
      const double sum = model.T.col(i).sum();
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "T column " << i + 1 << " sums to " << sum << " (defect " << sum - 1.0 << ")";
        report(os.str());
      }
      for (Index j = 0; j < model.T.rows(); ++j) {
        const double t = model.T(j, i);
        if (!(t >= 0.0 && t <= 1.0)) {
          std::ostringstream os;
          os << "T(" << j + 1 << "," << i + 1 << ") = " << t << " outside [0, 1]";
          report(os.str());
        }
      }
    }
  }

  if (model.prior.mode_count() != m) {
    std::ostringstream os;
    os << "prior has " << model.prior.mode_count() << " modes, expected " << m;
    report(os.str());
  } else {
    bool shapes_ok = true;
    for (std::size_t z = 0; z < m; ++z) {
      for (const auto& c : model.prior.mode(z)) {
        if (c.mu.size() != nx || c.P_half.dim() != nx) {
          report("prior mode " + std::to_string(z + 1) + " has a component with the wrong dimension");
          shapes_ok = false;
        }
      }
    }
    if (shapes_ok) {
      const double lt = model.prior.log_total();
      if (!std::isfinite(lt) || std::abs(std::exp(lt) - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "prior weights sum to " << std::exp(lt);
        report(os.str());
      }
    }
  }
  return out;
}

TransformedMode transform_mode(const ModeParams& mode) {
  const Index nx = mode.nx(), ny = mode.ny(), nu = mode.nu();
  const Matrix& F = mode.Pi_half.matrix();
  TransformedMode t;
  t.R_half = UtFactor(F.topLeftCorner(ny, ny));
  t.H = F.topRightCorner(ny, nx);
  t.Q_half = UtFactor(F.bottomRightCorner(nx, nx));
  const Vector rd = t.R_half.matrix().diagonal();
  if (ny > 0 && !(rd.minCoeff() > 1e-300 && rd.minCoeff() > 1e-14 * rd.maxCoeff())) {
    throw Error(ErrorCode::SingularR, "R^{1/2} is not invertible");
  }
  // Kbar = H^T R^{-T/2}  <=>  Kbar^T = R^{-1/2} H.
  t.Kbar = t.R_half.matrix().triangularView<Eigen::Upper>().solve(t.H).transpose();
  t.A_k = mode.A - t.Kbar * mode.C;
  t.B_k.resize(nx, nu + ny);
  t.B_k << mode.B - t.Kbar * mode.D, t.Kbar;
  t.C_k = mode.C;
  t.D_k = Matrix::Zero(ny, nu + ny);
  t.D_k.leftCols(nu) = mode.D;
  return t;
}

std::vector<TransformedMode> transform_modes(const JmlsModel& model) {
  std::vector<TransformedMode> out;
  out.reserve(model.m());
  for (const auto& p : model.modes) out.push_back(transform_mode(p));
  return out;
}

JmlsModel apply_state_transform(const JmlsModel& model, const Matrix& Tr) {
  const Index nx = model.nx, ny = model.ny;
  if (Tr.rows() != nx || Tr.cols() != nx) throw Error(ErrorCode::DimensionMismatch, "transform must be nx x nx");
  Eigen::JacobiSVD<Matrix> svd(Tr);
  const Vector sv = svd.singularValues();
  if (nx > 0 && !(sv(nx - 1) > 0.0 && sv(0) / sv(nx - 1) < 1e12)) {
    throw Error(ErrorCode::SingularTransform, "state transform is singular or badly conditioned");
  }
  const Matrix Tr_inv = Tr.partialPivLu().inverse();
  Matrix block = Matrix::Identity(ny + nx, ny + nx);
  block.bottomRightCorner(nx, nx) = Tr;

  JmlsModel out = model;
  for (auto& p : out.modes) {
    p.A = Tr * p.A * Tr_inv;
    p.B = Tr * p.B;
    p.C = p.C * Tr_inv;
    p.Pi_half = qless_qr(p.Pi_half.matrix() * block.transpose());
  }
  for (std::size_t z = 0; z < out.prior.mode_count(); ++z) {
    for (auto& c : out.prior.mode(z)) {
      c.mu = Tr * c.mu;
      c.P_half = qless_qr(c.P_half.matrix() * Tr.transpose());
    }
  }
  return out;
}

std::vector<ComplexMatrix> frequency_response(const ModeParams& mode, const std::vector<double>& freqs) {
  const Index nx = mode.nx();
  std::vector<ComplexMatrix> out;
  out.reserve(freqs.size());
  const ComplexMatrix A = mode.A.cast<std::complex<double>>();
  const ComplexMatrix B = mode.B.cast<std::complex<double>>();
  const ComplexMatrix C = mode.C.cast<std::complex<double>>();
  const ComplexMatrix D = mode.D.cast<std::complex<double>>();
  for (double w : freqs) {
    const std::complex<double> ejw = std::polar(1.0, w);
    ComplexMatrix M = ejw * ComplexMatrix::Identity(nx, nx) - A;
    out.push_back(C * M.partialPivLu().solve(B) + D);
  }
  return out;
}

std::vector<double> log_frequency_grid(std::size_t n, double lo, double hi) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

double bode_magnitude_error(const ModeParams& a, const ModeParams& b, const std::vector<double>& freqs) {
  const auto ha = frequency_response(a, freqs);
  const auto hb = frequency_response(b, freqs);
  double err = 0.0;
  for (std::size_t i = 0; i < freqs.size(); ++i) err += (ha[i].cwiseAbs() - hb[i].cwiseAbs()).squaredNorm();
  return err;
}

ModeMatch match_modes(const JmlsModel& estimated, const JmlsModel& truth, const std::vector<double>& freqs) {
  const std::size_t m = truth.m();
  if (estimated.m() != m) throw Error(ErrorCode::ModeCountMismatch, "models have different mode counts");
  if (m > 8) throw Error(ErrorCode::ModeCountMismatch, "exhaustive mode matching supports at most 8 modes");
  Matrix pair_err(m, m);  // (truth, estimated)
  for (std::size_t t = 0; t < m; ++t)
    for (std::size_t e = 0; e < m; ++e) pair_err(t, e) = bode_magnitude_error(truth.modes[t], estimated.modes[e], freqs);

  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  ModeMatch best;
  bool first = true;
  do {
    double total = 0.0;
    for (std::size_t t = 0; t < m; ++t) total += pair_err(t, perm[t]);
    if (first || total < best.total_error) {
      best.permutation = perm;
      best.total_error = total;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.per_mode_error.resize(m);
  for (std::size_t t = 0; t < m; ++t) best.per_mode_error[t] = pair_err(t, best.permutation[t]);
  return best;
}

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

HybridMixture uniform_prior(std::size_t m, const Vector& mean, const Matrix& cov) {
  HybridMixture prior(m);
  const UtFactor f = chol_upper(cov);
  for (std::size_t z = 0; z < m; ++z) {
    prior.mode(z).push_back(GaussianComponent{-std::log(static_cast<double>(m)), mean, f});
  }
  return prior;
}

JmlsModel random_model(Index nx, Index nu, Index ny, std::size_t m, std::uint64_t seed, Convention convention) {
  if (nx < 1 || nu < 0 || ny < 1 || m < 1) throw Error(ErrorCode::InvalidModel, "random_model dimensions must be >= 1");
  Rng rng(seed);
  auto gaussian = [&](Index r, Index c, double scale) {
    Matrix M(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) M(i, j) = scale * rng.normal();
    return M;
  };

  JmlsModel model;
  model.nx = nx;
  model.nu = nu;
  model.ny = ny;
  model.convention = convention;
  for (std::size_t z = 0; z < m; ++z) {
    Matrix A;
    for (int attempt = 0;; ++attempt) {
      A = gaussian(nx, nx, 1.0 / std::sqrt(static_cast<double>(nx)));
      const double rho = spectral_radius(A);
      if (rho < 0.98) break;
      if (attempt >= 10000) {
        A *= 0.9 / rho;
        break;
      }
    }
    Matrix B = gaussian(nx, nu, 1.0);
    Matrix C = gaussian(ny, nx, 1.0);
    Matrix D = gaussian(ny, nu, 0.5);
    const Index d = nx + ny;
    const Matrix G = gaussian(d, d, 0.3);
    Matrix pi = G.transpose() * G;
    pi.diagonal().array() += 0.05;
    if (convention == Convention::classic) {
      pi.topRightCorner(ny, nx).setZero();
      pi.bottomLeftCorner(nx, ny).setZero();
    }
    model.modes.push_back(ModeParams{std::move(A), std::move(B), std::move(C), std::move(D), chol_upper(pi)});
  }
  model.T.resize(static_cast<Index>(m), static_cast<Index>(m));
  for (Index i = 0; i < model.T.cols(); ++i) {
    for (Index j = 0; j < model.T.rows(); ++j) model.T(j, i) = 0.2 + rng.uniform();
    model.T.col(i) /= model.T.col(i).sum();
  }
  model.prior = uniform_prior(m, Vector::Zero(nx), Matrix::Identity(nx, nx));
  return model;
}

}  // namespace jmls
