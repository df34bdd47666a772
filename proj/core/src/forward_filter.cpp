#include "jmls/forward_filter.hpp"

#include <cmath>
#include <numbers>

namespace jmls {

GaussianComponent correct_component(const GaussianComponent& c, const ModeParams& mode, const Vector& u,
                                    const Vector& y) {
  const Index nx = mode.nx(), ny = mode.ny();
  const Matrix& P_half = c.P_half.matrix();
  Matrix pre = Matrix::Zero(ny + nx, ny + nx);
  pre.topLeftCorner(ny, ny) = mode.Pi_half.matrix().topLeftCorner(ny, ny);
  pre.bottomLeftCorner(nx, ny) = P_half * mode.C.transpose();
  pre.bottomRightCorner(nx, nx) = P_half;
  const Matrix post = qless_qr(pre).matrix();

  const Matrix R11 = post.topLeftCorner(ny, ny);
  const Vector d = R11.diagonal();
  if (!(d.minCoeff() > 0.0) || !d.allFinite() || d.minCoeff() < 1e-14 * d.maxCoeff()) {
    throw Error(ErrorCode::DegenerateInnovation, "innovation covariance is not positive definite");
  }
  const Vector e = y - mode.C * c.mu - mode.D * u;
  const Vector white = R11.transpose().triangularView<Eigen::Lower>().solve(e);
  GaussianComponent out;
  out.mu = c.mu + post.topRightCorner(ny, nx).transpose() * white;
  out.P_half = UtFactor(post.bottomRightCorner(nx, nx));
  out.log_w = c.log_w - 0.5 * (white.squaredNorm() + 2.0 * d.array().log().sum() +
                               static_cast<double>(ny) * std::log(2.0 * std::numbers::pi));
  return out;
}

Correction correct(const HybridMixture& predicted, const JmlsModel& model, const Vector& u, const Vector& y) {
  HybridMixture post(predicted.mode_count());
  for (std::size_t z = 0; z < predicted.mode_count(); ++z) {
    auto& out = post.mode(z);
    out.reserve(predicted.mode(z).size());
    for (const auto& c : predicted.mode(z)) out.push_back(correct_component(c, model.modes[z], u, y));
  }
  const double lz = post.normalize();
  return Correction{std::move(post), lz};
}

HybridMixture predict(const HybridMixture& filtered, const JmlsModel& model,
                      const std::vector<TransformedMode>& transformed, const Vector& u_bar) {
  const std::size_t m = model.m();
  HybridMixture out(m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const double t = model.T(static_cast<Index>(j), static_cast<Index>(i));
      if (!(t > 0.0)) continue;
      const TransformedMode& tm = transformed[dynamics_mode(model.convention, i, j)];
      const Vector b = tm.offset(u_bar);
      const Index nx = tm.A_k.rows();
      for (const auto& c : filtered.mode(i)) {
        Matrix stack(2 * nx, nx);
        stack << c.P_half.matrix() * tm.A_k.transpose(), tm.Q_half.matrix();
        out.mode(j).push_back(GaussianComponent{c.log_w + std::log(t), tm.A_k * c.mu + b, qless_qr(stack)});
      }
    }
  }
  return out;
}

FilterOutput run_filter(const JmlsModel& model, const Dataset& data, const FilterOptions& options) {
  check_dimensions(model, data);
  const Index N = data.length();
  const auto transformed = transform_modes(model);
  FilterOutput out;
  out.predicted.reserve(static_cast<std::size_t>(N));
  out.filtered.reserve(static_cast<std::size_t>(N));
  HybridMixture pred = model.prior;
  for (Index k = 0; k < N; ++k) {
    Correction c = correct(pred, model, data.u.row(k).transpose(), data.y.row(k).transpose());
    out.step_loglik.push_back(c.log_normalizer);
    out.log_likelihood += c.log_normalizer;
    out.component_counts.push_back(c.posterior.component_count());
    reduce_per_mode(c.posterior, options.budget, options.reduction);
    out.predicted.push_back(std::move(pred));
    if (k + 1 < N) pred = predict(c.posterior, model, transformed, transition_input(data, model.convention, k));
    out.filtered.push_back(std::move(c.posterior));
  }
  return out;
}

}  // namespace jmls
