#include "jmls/em_estimator.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "jmls/parallel.hpp"

namespace jmls {

UtFactor component_sqrt_expectation(const Vector& mu, const UtFactor& P_half, const Vector& u, const Vector& y) {
  const Index n = mu.size(), nu = u.size(), ny = y.size();
  const Index p = nu + ny;
  Vector w(p);
  w << u, y;

  Matrix top(n + 1, n);
  top << P_half.matrix(), mu.transpose();
  const UtFactor M11 = qless_qr(top);
  const Vector d = M11.matrix().diagonal();
  if (n > 0 && !(d.minCoeff() > 1e-13 * std::max(d.maxCoeff(), 1e-300))) {
    // P + mu mu^T is singular: factor the full second moment directly.
    Matrix full = Matrix::Zero(n + 1, n + p);
    full.topLeftCorner(n, n) = P_half.matrix();
    full.bottomLeftCorner(1, n) = mu.transpose();
    full.bottomRightCorner(1, p) = w.transpose();
    return qless_qr(full);
  }
  const Vector lambda = M11.solve_transposed(mu);
  double slack = 1.0 - lambda.squaredNorm();
  if (slack < 0.0) {
    if (slack < -1e-10) {
      std::ostringstream os;
      os << "lambda^T lambda = " << 1.0 - slack;
      throw Error(ErrorCode::LambdaOverflow, os.str());
    }
    slack = 0.0;
  }
  Matrix F = Matrix::Zero(n + p, n + p);
  F.topLeftCorner(n, n) = M11.matrix();
  F.topRightCorner(n, p) = lambda * w.transpose();
  if (p > 0) F.block(n, n, 1, p) = std::sqrt(slack) * w.transpose();
  return UtFactor(std::move(F));
}

Matrix selector_T1(Index nx, Index nu, Index ny) {
  Matrix T = Matrix::Zero(nx + nu, 2 * nx + nu + ny);
  T.block(0, 0, nx, nx).setIdentity();
  T.block(nx, 2 * nx, nu, nu).setIdentity();
  return T;
}

Matrix selector_T2(Index nx, Index nu, Index ny) {
  Matrix T = Matrix::Zero(ny + nx, 2 * nx + nu + ny);
  T.block(0, 2 * nx + nu, ny, ny).setIdentity();
  T.block(ny, nx, nx, nx).setIdentity();
  return T;
}

StatBlocks read_stats(const UtFactor& M_half, Index nx, Index nu, Index ny) {
  const Matrix T1 = selector_T1(nx, nu, ny);
  const Matrix T2 = selector_T2(nx, nu, ny);
  const Matrix a = M_half.matrix() * T1.transpose();
  const Matrix b = M_half.matrix() * T2.transpose();
  return StatBlocks{symmetrize(a.transpose() * a), symmetrize(b.transpose() * b), b.transpose() * a};
}

SuffStats accumulate_stats(const std::vector<JointSmoothedMixture>& joint, const Dataset& data, const JmlsModel& model) {
  const std::size_t m = model.m();
  const Index nx = model.nx, nu = model.nu, ny = model.ny;
  const Index dim = 2 * nx + nu + ny;
  const Index N = data.length();
  const bool classic = model.convention == Convention::classic;

  SuffStats s;
  s.nx = nx;
  s.nu = nu;
  s.ny = ny;
  s.convention = model.convention;
  s.c_m.assign(m, 0.0);
  s.transitions = Matrix::Zero(static_cast<Index>(m), static_cast<Index>(m));
  std::vector<QrAccumulator> acc(m, QrAccumulator(dim));
  std::vector<QrAccumulator> acc_dyn(classic ? m : 0, QrAccumulator(dim));
  if (classic) s.c_dyn.assign(m, 0.0);

  for (Index k = 0; k < N; ++k) {
    const JointSmoothedMixture& js = joint[static_cast<std::size_t>(k)];
    const Vector uk = data.u.row(k).transpose();
    const Vector yk = data.y.row(k).transpose();
    const bool has_next = k + 1 < N;
    const Vector unext = has_next ? Vector(data.u.row(k + 1).transpose()) : Vector::Zero(nu);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        for (const auto& c : js.pair(i, j)) {
          const double w = std::exp(c.log_w);
          acc[i].add(w, component_sqrt_expectation(c.mu, c.P_half, uk, yk).matrix());
          s.c_m[i] += w;
          if (!classic) {
            s.transitions(static_cast<Index>(j), static_cast<Index>(i)) += w;
          } else if (has_next) {
            acc_dyn[j].add(w, component_sqrt_expectation(c.mu, c.P_half, unext, yk).matrix());
            s.c_dyn[j] += w;
            s.transitions(static_cast<Index>(j), static_cast<Index>(i)) += w;
          }
        }
      }
    }
  }
  for (auto& a : acc) s.M_half.push_back(a.finish());
  for (auto& a : acc_dyn) s.M_half_dyn.push_back(a.finish());
  return s;
}

Matrix solve_gamma(const UtFactor& M_half, Index nx, Index nu, Index ny, double ridge_condition,
                   std::vector<std::string>* warnings) {
  const Matrix T1 = selector_T1(nx, nu, ny);
  const Matrix T2 = selector_T2(nx, nu, ny);
  const Matrix a = M_half.matrix() * T1.transpose();
  const Matrix psi = (M_half.matrix() * T2.transpose()).transpose() * a;
  UtFactor S = qless_qr(a);
  const Index dim = nx + nu;
  Eigen::JacobiSVD<Matrix> svd(S.matrix());
  const Vector sv = svd.singularValues();
  const double smin = sv(dim - 1), smax = sv(0);
  if (!(smin > 0.0) || (smax / smin) * (smax / smin) > ridge_condition) {
    const double ridge = 1e-10 * S.matrix().squaredNorm() / static_cast<double>(dim);
    if (!(ridge > 0.0)) throw Error(ErrorCode::DegenerateMode, "state/input second moment is zero");
    Matrix stack(2 * dim, dim);
    stack << S.matrix(), std::sqrt(ridge) * Matrix::Identity(dim, dim);
    S = qless_qr(stack);
    if (warnings) {
      std::ostringstream os;
      os << "Sigma is ill-conditioned (cond " << (smin > 0.0 ? (smax / smin) * (smax / smin) : INFINITY)
         << "), ridge " << ridge << " added";
      warnings->push_back(os.str());
    }
  }
  const Matrix X = S.matrix().transpose().triangularView<Eigen::Lower>().solve(psi.transpose());
  return S.matrix().triangularView<Eigen::Upper>().solve(X).transpose();
}

UtFactor pi_factor(const UtFactor& M_half, double c, const ModeParams& p) {
  const Index nx = p.nx(), nu = p.nu(), ny = p.ny();
  Matrix W = Matrix::Zero(2 * nx + nu + ny, ny + nx);
  W.block(0, 0, nx, ny) = -p.C.transpose();
  W.block(0, ny, nx, nx) = -p.A.transpose();
  W.block(nx, ny, nx, nx).setIdentity();
  W.block(2 * nx, 0, nu, ny) = -p.D.transpose();
  W.block(2 * nx, ny, nu, nx) = -p.B.transpose();
  W.block(2 * nx + nu, 0, ny, ny).setIdentity();
  return qless_qr(M_half.matrix() * W / std::sqrt(c));
}

namespace {

void check_mode_mass(const std::vector<double>& c, double ratio, const char* what) {
  double total = 0.0;
  for (double v : c) total += v;
  for (std::size_t z = 0; z < c.size(); ++z) {
    if (!(c[z] >= ratio * total) || !(c[z] > 0.0)) {
      std::ostringstream os;
      os << "mode " << z + 1 << " has " << what << " responsibility " << c[z] << " of " << total;
      throw Error(ErrorCode::DegenerateMode, os.str());
    }
  }
}

}  // namespace

MStepResult mstep(const SuffStats& stats, const HybridMixture& smoothed_prior, const JmlsModel& current,
                  const MStepOptions& opts) {
  MStepResult res{current, {}};
  JmlsModel& model = res.model;
  const std::size_t m = current.m();
  const Index nx = stats.nx, nu = stats.nu, ny = stats.ny;
  const bool classic = stats.convention == Convention::classic;
  const bool linear = !(opts.freeze.gamma && opts.freeze.pi);

  if (linear) {
    check_mode_mass(stats.c_m, opts.degenerate_ratio, "measurement");
    if (classic) check_mode_mass(stats.c_dyn, opts.degenerate_ratio, "dynamics");
  }

  for (std::size_t z = 0; z < m && linear; ++z) {
    ModeParams& p = model.modes[z];
    const std::size_t before = res.warnings.size();
    if (!opts.freeze.gamma) {
      const Matrix g = solve_gamma(stats.M_half[z], nx, nu, ny, opts.ridge_condition, &res.warnings);
      if (!classic) {
        p = ModeParams::from_gamma(g, nx, nu, ny, p.Pi_half);
      } else {
        const Matrix gd = solve_gamma(stats.M_half_dyn[z], nx, nu, ny, opts.ridge_condition, &res.warnings);
        p.C = g.topLeftCorner(ny, nx);
        p.D = g.topRightCorner(ny, nu);
        p.A = gd.bottomLeftCorner(nx, nx);
        p.B = gd.bottomRightCorner(nx, nu);
      }
    }
    if (!opts.freeze.pi) {
      const UtFactor U = pi_factor(stats.M_half[z], stats.c_m[z], p);
      if (!classic) {
        p.Pi_half = U;
      } else {
        const UtFactor Ud = pi_factor(stats.M_half_dyn[z], stats.c_dyn[z], p);
        Matrix F = Matrix::Zero(ny + nx, ny + nx);
        F.topLeftCorner(ny, ny) = U.matrix().topLeftCorner(ny, ny);
        F.bottomRightCorner(nx, nx) = qless_qr(Ud.matrix().rightCols(nx)).matrix();
        p.Pi_half = UtFactor(std::move(F));
      }
    }
    for (std::size_t i = before; i < res.warnings.size(); ++i)
      res.warnings[i] = "mode " + std::to_string(z + 1) + ": " + res.warnings[i];
  }

  if (!opts.freeze.T) {
    for (Index i = 0; i < model.T.cols(); ++i) {
      const double c = stats.transitions.col(i).sum();
      if (!(c > 0.0)) continue;
      Vector col = stats.transitions.col(i) / c;
      if (opts.eps_T > 0.0) col = col.cwiseMax(opts.eps_T);
      model.T.col(i) = col / col.sum();
    }
  }
  if (!opts.freeze.prior) model.prior = smoothed_prior;
  return res;
}

EStepResult e_step(const JmlsModel& model, const Dataset& data, const EStepOptions& opts) {
  EStepResult r;
  r.filter = run_filter(model, data, FilterOptions{opts.filter_budget, opts.reduction});
  r.bif = run_bif(model, data, BifOptions{opts.bif_budget, opts.reduction});
  SmootherOptions so;
  so.budget = opts.smoother_budget;
  so.reduction = opts.reduction;
  so.threads = opts.threads;
  r.joint = run_smoother(model, data, r.filter, r.bif, so);
  r.stats = accumulate_stats(r.joint, data, model);
  r.smoothed_prior = smoothed_prior(r.joint.front(), opts.filter_budget, opts.reduction);
  return r;
}

EmResult run_em(const JmlsModel& model0, const Dataset& data, const EmConfig& config) {
  using clock = std::chrono::steady_clock;
  if (const auto issues = validate(model0); !issues.empty()) throw Error(ErrorCode::InvalidModel, issues.front());
  check_dimensions(model0, data);

  EmResult res;
  JmlsModel model = model0;
  const bool staging = config.stage_T && !config.mstep.freeze.T;
  bool T_enabled = !staging && !config.mstep.freeze.T;
  int below_T = 0, below = 0;
  double prev = 0.0;

  for (int it = 0;; ++it) {
    const auto t0 = clock::now();
    EStepResult e = e_step(model, data, config.estep);
    const double ll = e.filter.log_likelihood;
    bool stop = it >= config.max_iter;
    if (it > 0 && !stop) {
      const double dl = ll - prev;
      if (staging && !T_enabled) {
        below_T = dl < config.delta_T ? below_T + 1 : 0;
        if (below_T >= config.T_patience) T_enabled = true;
      } else {
        below = dl < config.eps ? below + 1 : 0;
        if (below >= config.patience) {
          stop = true;
          res.converged = true;
        }
      }
    }
    const bool T_flag = T_enabled;
    JmlsModel next;
    if (!stop) {
      MStepOptions mo = config.mstep;
      mo.freeze.T = config.mstep.freeze.T || !T_enabled;
      MStepResult ms = mstep(e.stats, e.smoothed_prior, model, mo);
      for (auto& w : ms.warnings) res.warnings.push_back("iteration " + std::to_string(it) + ": " + w);
      next = std::move(ms.model);
    }
    const double ms_elapsed = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    res.trace.push_back(EmIterate{it, model, ll, ms_elapsed, T_flag});
    if (config.on_iterate) config.on_iterate(res.trace.back());
    prev = ll;
    if (stop) break;
    model = std::move(next);
  }
  res.model = res.trace.back().model;
  res.final_loglik = res.trace.back().loglik;
  return res;
}

}  // namespace jmls
