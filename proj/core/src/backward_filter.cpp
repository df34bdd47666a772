#include "jmls/backward_filter.hpp"

#include <cmath>
#include <numbers>

namespace jmls {

LikelihoodComponent bif_init(const ModeParams& mode, const Vector& u, const Vector& y) {
  const Index ny = mode.ny();
  const Matrix R_half = mode.Pi_half.matrix().topLeftCorner(ny, ny);
  const Vector d = R_half.diagonal();
  if (!(d.minCoeff() > 0.0) || d.minCoeff() < 1e-14 * d.maxCoeff()) throw Error(ErrorCode::SingularR, "R is singular");
  const auto lower = R_half.transpose().triangularView<Eigen::Lower>();
  const Matrix W = lower.solve(mode.C);  // R^{-T/2} C
  const Vector e = lower.solve(Vector(y - mode.D * u));
  LikelihoodComponent c;
  c.L_half = qless_qr(W);
  c.s = -(W.transpose() * e);
  c.r = e.squaredNorm() + static_cast<double>(ny) * std::log(2.0 * std::numbers::pi) + 2.0 * d.array().log().sum();
  return c;
}

LikelihoodComponent marginalize_dynamics(const LikelihoodComponent& next, const TransformedMode& tm, const Vector& b) {
  const Index n = tm.A_k.rows();
  const Matrix& G = next.L_half.matrix();
  const Matrix& Qh = tm.Q_half.matrix();
  // K = I + G Q G^T and Gbar = K^{-T/2} G, so Gbar^T Gbar = (L^{-1} + Q)^{-1}
  // whenever L is invertible, and the pair stays well defined when it is not.
  Matrix stack(2 * n, n);
  stack << Matrix::Identity(n, n), Qh * G.transpose();
  const UtFactor K_half = qless_qr(stack);
  const Matrix Gbar = K_half.matrix().transpose().triangularView<Eigen::Lower>().solve(G);
  const Vector Qs = Qh.transpose() * (Qh * next.s);
  const Vector v = Gbar * Qs;
  const Vector s_tilde = next.s - Gbar.transpose() * v;  // (I + L Q)^{-1} s
  const Vector Gb = Gbar * b;

  LikelihoodComponent out;
  out.L_half = qless_qr(Gbar * tm.A_k);
  out.s = tm.A_k.transpose() * (Gbar.transpose() * Gb + s_tilde);
  out.r = next.r + Gb.squaredNorm() + 2.0 * s_tilde.dot(b) - (Qh * next.s).squaredNorm() + v.squaredNorm() +
          K_half.log_det();
  return out;
}

namespace {

void add_measurement(LikelihoodComponent& c, const LikelihoodComponent& meas) {
  const Index n = c.s.size();
  Matrix stack(2 * n, n);
  stack << c.L_half.matrix(), meas.L_half.matrix();
  c.L_half = qless_qr(stack);
  c.s += meas.s;
  c.r += meas.r;
}

}  // namespace

LikelihoodMixture bif_step(const LikelihoodMixture& next, const JmlsModel& model,
                           const std::vector<TransformedMode>& transformed, const Vector& u_bar, const Vector& u,
                           const Vector& y, const BifOptions& options) {
  const std::size_t m = model.m();
  LikelihoodMixture out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const LikelihoodComponent meas = bif_init(model.modes[i], u, y);
    std::vector<LikelihoodComponent> comps;
    for (std::size_t j = 0; j < m; ++j) {
      const double t = model.T(static_cast<Index>(j), static_cast<Index>(i));
      if (!(t > 0.0)) continue;
      const TransformedMode& tm = transformed[dynamics_mode(model.convention, i, j)];
      const Vector b = tm.offset(u_bar);
      for (const auto& c : next[j]) {
        LikelihoodComponent p = marginalize_dynamics(c, tm, b);
        p.r -= 2.0 * std::log(t);
        add_measurement(p, meas);
        comps.push_back(std::move(p));
      }
    }
    comps = merge_identical_likelihoods(std::move(comps));
    if (options.budget != kUnbounded) comps = reduce_likelihood(std::move(comps), options.budget, options.reduction);
    out[i] = std::move(comps);
  }
  return out;
}

BifOutput run_bif(const JmlsModel& model, const Dataset& data, const BifOptions& options) {
  check_dimensions(model, data);
  const Index N = data.length();
  const std::size_t m = model.m();
  const auto transformed = transform_modes(model);
  BifOutput out;
  out.lik.resize(static_cast<std::size_t>(N) + 1);
  out.lik[N].resize(m);
  for (std::size_t z = 0; z < m; ++z) out.lik[N][z].push_back(LikelihoodComponent::uninformative(model.nx));
  out.lik[N - 1].resize(m);
  for (std::size_t z = 0; z < m; ++z) {
    out.lik[N - 1][z].push_back(bif_init(model.modes[z], data.u.row(N - 1).transpose(), data.y.row(N - 1).transpose()));
  }
  for (Index k = N - 2; k >= 0; --k) {
    out.lik[k] = bif_step(out.lik[k + 1], model, transformed, transition_input(data, model.convention, k),
                          data.u.row(k).transpose(), data.y.row(k).transpose(), options);
  }
  return out;
}

}  // namespace jmls
