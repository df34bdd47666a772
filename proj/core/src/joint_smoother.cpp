#include "jmls/joint_smoother.hpp"

#include <cmath>
#include <limits>

#include "jmls/parallel.hpp"

namespace jmls {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Factor of the covariance of a sub-block of a stacked Gaussian.
UtFactor block_factor(const UtFactor& f, Index offset, Index n) {
  return qless_qr(f.matrix().middleCols(offset, n));
}

HybridMixture marginal(const JointSmoothedMixture& joint, bool first, std::size_t budget,
                       const ReductionOptions& reduction) {
  const std::size_t m = joint.m;
  HybridMixture out(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t target = first ? i : j;
      for (const auto& c : joint.pair(i, j)) {
        const Index n = c.mu.size() / 2;
        if (first) {
          out.mode(target).push_back(GaussianComponent{c.log_w, c.mu.head(n), UtFactor(c.P_half.matrix().topLeftCorner(n, n))});
        } else {
          out.mode(target).push_back(GaussianComponent{c.log_w, c.mu.tail(n), block_factor(c.P_half, n, n)});
        }
      }
    }
  }
  reduce_per_mode(out, budget, reduction);
  return out;
}

}  // namespace

double JointSmoothedMixture::log_pair_weight(std::size_t i, std::size_t j) const {
  std::vector<double> lw;
  for (const auto& c : pair(i, j)) lw.push_back(c.log_w);
  return lw.empty() ? kNegInf : logsumexp(lw);
}

JointPrediction joint_predict(const GaussianComponent& filtered, const TransformedMode& tm, const Vector& b) {
  const Index n = filtered.mu.size();
  JointPrediction p;
  p.mu.resize(2 * n);
  p.mu << filtered.mu, tm.A_k * filtered.mu + b;
  Matrix U = Matrix::Zero(2 * n, 2 * n);
  U.topLeftCorner(n, n) = filtered.P_half.matrix();
  U.topRightCorner(n, n) = filtered.P_half.matrix() * tm.A_k.transpose();
  U.bottomRightCorner(n, n) = tm.Q_half.matrix();
  p.P_half = UtFactor(std::move(U));
  return p;
}

GaussianComponent fuse(const JointPrediction& pred, const LikelihoodComponent& lik, double log_w_filtered,
                       double log_T) {
  const Index n2 = pred.mu.size();
  const Index n = n2 / 2;
  const Matrix& U = pred.P_half.matrix();
  const Vector du = U.diagonal();
  if (!(du.minCoeff() > 0.0) || du.minCoeff() < 1e-150 * std::max(1.0, du.maxCoeff())) {
    throw Error(ErrorCode::SingularPredCov, "joint predicted covariance is singular");
  }
  // J = U [0, G]^T; QR of [[I, 0], [J, U]] yields [[K^{1/2}, *], [0, P_N^{1/2}]].
  const Matrix J = U.rightCols(n) * lik.L_half.matrix().transpose();
  Matrix pre = Matrix::Zero(n + n2, n + n2);
  pre.topLeftCorner(n, n).setIdentity();
  pre.bottomLeftCorner(n2, n) = J;
  pre.bottomRightCorner(n2, n2) = U;
  const Matrix post = qless_qr(pre).matrix();
  const UtFactor PN_half(post.bottomRightCorner(n2, n2));

  // mu_N = P_N (P_pred^{-1} mu_pred - gamma), gamma = [0; s].
  const Vector a = pred.P_half.solve_transposed(pred.mu);  // U^{-T} mu_pred
  Vector info = pred.P_half.solve(a);
  info.tail(n) -= lik.s;
  const Vector mu_N = PN_half.matrix().transpose() * (PN_half.matrix() * info);

  // mu_N^T P_N^{-1} mu_N = info^T P_N info.
  const double quad_N = (PN_half.matrix() * info).squaredNorm();
  const double quad_pred = a.squaredNorm();
  const double beta = quad_N - quad_pred - lik.r + PN_half.log_det() - pred.P_half.log_det() + 2.0 * log_w_filtered +
                      2.0 * log_T;
  return GaussianComponent{0.5 * beta, mu_N, PN_half};
}

JointSmoothedMixture smooth_step(const HybridMixture& filtered, const LikelihoodMixture& next_lik,
                                 const JmlsModel& model, const std::vector<TransformedMode>& transformed,
                                 const Vector& u_bar, const SmootherOptions& options) {
  const std::size_t m = model.m();
  JointSmoothedMixture out;
  out.m = m;
  out.pairs.resize(m * m);
  std::vector<double> all_lw;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double t = model.T(static_cast<Index>(j), static_cast<Index>(i));
      if (!(t > 0.0)) continue;
      const TransformedMode& tm = transformed[dynamics_mode(model.convention, i, j)];
      const Vector b = tm.offset(u_bar);
      const double log_t = std::log(t);
      for (const auto& f : filtered.mode(i)) {
        if (f.log_w == kNegInf) continue;
        const JointPrediction pred = joint_predict(f, tm, b);
        for (const auto& l : next_lik[j]) {
          GaussianComponent g = fuse(pred, l, f.log_w, log_t);
          all_lw.push_back(g.log_w);
          out.pair(i, j).push_back(std::move(g));
        }
      }
    }
  }
  if (all_lw.empty()) throw Error(ErrorCode::AllZeroWeights, "no joint smoothed components");
  const double lz = logsumexp(all_lw);
  if (!std::isfinite(lz)) throw Error(ErrorCode::AllZeroWeights, "joint smoothed weights underflowed");
  for (auto& p : out.pairs) {
    for (auto& c : p) c.log_w -= lz;
    std::erase_if(p, [&](const GaussianComponent& c) { return c.log_w < options.drop_log_weight; });
    if (options.budget != kUnbounded) p = reduce(std::move(p), options.budget, options.reduction);
  }
  return out;
}

std::vector<JointSmoothedMixture> run_smoother(const JmlsModel& model, const Dataset& data,
                                               const FilterOutput& filter, const BifOutput& bif,
                                               const SmootherOptions& options) {
  const Index N = data.length();
  const auto transformed = transform_modes(model);
  std::vector<JointSmoothedMixture> out(static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), options.threads, [&](std::size_t k) {
    const Index kk = static_cast<Index>(k);
    out[k] = smooth_step(filter.filtered[k], bif.lik[k + 1], model, transformed,
                         transition_input(data, model.convention, kk), options);
  });
  return out;
}

HybridMixture marginal_first(const JointSmoothedMixture& joint, std::size_t budget, const ReductionOptions& reduction) {
  return marginal(joint, true, budget, reduction);
}

HybridMixture marginal_second(const JointSmoothedMixture& joint, std::size_t budget,
                              const ReductionOptions& reduction) {
  return marginal(joint, false, budget, reduction);
}

HybridMixture smoothed_prior(const JointSmoothedMixture& first, std::size_t budget, const ReductionOptions& reduction) {
  HybridMixture prior = marginal_first(first, budget, reduction);
  prior.normalize();
  return prior;
}

HybridMixture combine_two_filter(const HybridMixture& predicted, const LikelihoodMixture& lik) {
  const std::size_t m = predicted.mode_count();
  HybridMixture out(m);
  for (std::size_t z = 0; z < m; ++z) {
    for (const auto& p : predicted.mode(z)) {
      const Index n = p.mu.size();
      for (const auto& l : lik[z]) {
        // Same construction as fuse() on a single block.
        const Matrix J = p.P_half.matrix() * l.L_half.matrix().transpose();
        Matrix pre = Matrix::Zero(2 * n, 2 * n);
        pre.topLeftCorner(n, n).setIdentity();
        pre.bottomLeftCorner(n, n) = J;
        pre.bottomRightCorner(n, n) = p.P_half.matrix();
        const Matrix post = qless_qr(pre).matrix();
        const UtFactor K_half(post.topLeftCorner(n, n));
        const UtFactor Pn(post.bottomRightCorner(n, n));
        // Posterior mean mu - P (I + L P)^{-1} (L mu + s) written with factors:
        // mu_N = mu - P_N (L mu + s).
        const Vector Lmu_s = l.L_half.matrix().transpose() * (l.L_half.matrix() * p.mu) + l.s;
        const Vector mu = p.mu - Pn.matrix().transpose() * (Pn.matrix() * Lmu_s);
        // ln integral N(x|mu_p, P) L(x) = -1/2 (r + 2 s^T mu_p + mu_p^T L mu_p - (L mu_p + s)^T P_N (L mu_p + s)) - 1/2 ln|K|.
        const double gain = (Pn.matrix() * Lmu_s).squaredNorm();
        const double quad = l.r + 2.0 * l.s.dot(p.mu) + (l.L_half.matrix() * p.mu).squaredNorm();
        const double lw = p.log_w - 0.5 * (quad - gain) - 0.5 * K_half.log_det();
        out.mode(z).push_back(GaussianComponent{lw, mu, Pn});
      }
    }
  }
  out.normalize();
  return out;
}

}  // namespace jmls
