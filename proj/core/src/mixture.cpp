#include "jmls/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace jmls {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// ln|P| with the factor diagonal floored, so degenerate (delta) components
// still produce finite, comparable merge costs.
double floored_log_det(const UtFactor& f) {
  double acc = 0.0;
  for (Index i = 0; i < f.dim(); ++i) acc += std::log(std::max(f.matrix()(i, i), 1e-300));
  return 2.0 * acc;
}

double log_det_cov(const Matrix& p) { return floored_log_det(chol_upper(p)); }

struct Moment {
  double w;  // weight relative to the reduced list
  Vector mu;
  Matrix P;
  double log_det;
};

Matrix merged_cov(const Moment& a, const Moment& b, const Vector& mu) {
  const double w = a.w + b.w;
  const Vector da = a.mu - mu;
  const Vector db = b.mu - mu;
  return (a.w / w) * (a.P + da * da.transpose()) + (b.w / w) * (b.P + db * db.transpose());
}

Vector merged_mean(const Moment& a, const Moment& b) { return (a.w * a.mu + b.w * b.mu) / (a.w + b.w); }

double pair_cost(const Moment& a, const Moment& b) {
  if (a.w + b.w <= 0.0) return 0.0;
  const Vector mu = merged_mean(a, b);
  const double ld = log_det_cov(merged_cov(a, b, mu));
  return 0.5 * ((a.w + b.w) * ld - a.w * a.log_det - b.w * b.log_det);
}

}  // namespace

std::size_t HybridMixture::component_count() const {
  std::size_t n = 0;
  for (const auto& m : modes_) n += m.size();
  return n;
}

double HybridMixture::log_mode_weight(std::size_t z) const {
  double acc = kNegInf;
  for (const auto& c : modes_.at(z)) acc = log_add(acc, c.log_w);
  return acc;
}

double HybridMixture::log_total() const {
  double acc = kNegInf;
  for (std::size_t z = 0; z < modes_.size(); ++z) acc = log_add(acc, log_mode_weight(z));
  return acc;
}

double HybridMixture::normalize() {
  const double lt = log_total();
  if (!std::isfinite(lt)) throw Error(ErrorCode::AllZeroWeights, "mixture has no finite positive weight");
  for (auto& m : modes_)
    for (auto& c : m) c.log_w -= lt;
  return lt;
}

double LikelihoodComponent::log_eval(const Vector& x) const {
  const Vector gx = L_half.matrix() * x;
  return -0.5 * (r + 2.0 * x.dot(s) + gx.squaredNorm());
}

LikelihoodComponent LikelihoodComponent::uninformative(Index n) {
  return LikelihoodComponent{0.0, Vector::Zero(n), UtFactor::zero(n)};
}

double runnalls_cost(const GaussianComponent& a, const GaussianComponent& b) {
  const Moment ma{std::exp(a.log_w), a.mu, a.covariance(), floored_log_det(a.P_half)};
  const Moment mb{std::exp(b.log_w), b.mu, b.covariance(), floored_log_det(b.P_half)};
  return pair_cost(ma, mb);
}

GaussianComponent merge_moments(const GaussianComponent& a, const GaussianComponent& b) {
  const double hi = std::max(a.log_w, b.log_w);
  const Moment ma{std::exp(a.log_w - hi), a.mu, a.covariance(), 0.0};
  const Moment mb{std::exp(b.log_w - hi), b.mu, b.covariance(), 0.0};
  const Vector mu = merged_mean(ma, mb);
  return GaussianComponent{log_add(a.log_w, b.log_w), mu, chol_upper(merged_cov(ma, mb, mu))};
}

std::vector<GaussianComponent> reduce(std::vector<GaussianComponent> components, std::size_t budget,
                                      const ReductionOptions& opts) {
  budget = std::max<std::size_t>(budget, 1);
  if (components.size() <= budget) return components;

  std::vector<double> lw;
  lw.reserve(components.size());
  for (const auto& c : components) lw.push_back(c.log_w);
  const double lt = logsumexp(lw);
  if (std::isfinite(lt)) {
    const double floor = lt - opts.prune_log_ratio;
    std::erase_if(components, [&](const GaussianComponent& c) { return c.log_w < floor; });
  }
  if (components.size() <= budget) return components;

  const std::size_t n = components.size();
  std::vector<Moment> mom;
  mom.reserve(n);
  for (const auto& c : components) {
    mom.push_back(Moment{std::exp(c.log_w - lt), c.mu, c.covariance(), floored_log_det(c.P_half)});
  }
  std::vector<bool> alive(n, true);
  Matrix cost = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) cost(i, j) = pair_cost(mom[i], mom[j]);

  std::size_t active = n;
  while (active > budget) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        if (!found || cost(i, j) < best) {
          best = cost(i, j);
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    Moment& a = mom[bi];
    const Moment& b = mom[bj];
    const Vector mu = merged_mean(a, b);
    const Matrix P = symmetrize(merged_cov(a, b, mu));
    const UtFactor P_half = chol_upper(P);
    components[bi] = GaussianComponent{log_add(components[bi].log_w, components[bj].log_w), mu, P_half};
    a = Moment{a.w + b.w, mu, P, floored_log_det(P_half)};
    alive[bj] = false;
    --active;
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi) continue;
      const double c = pair_cost(mom[std::min(k, bi)], mom[std::max(k, bi)]);
      cost(std::min(k, bi), std::max(k, bi)) = c;
    }
  }

  std::vector<GaussianComponent> out;
  out.reserve(budget);
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) out.push_back(std::move(components[i]));
  return out;
}

void reduce_per_mode(HybridMixture& mix, std::size_t budget, const ReductionOptions& opts) {
  if (budget == kUnbounded) return;
  for (std::size_t z = 0; z < mix.mode_count(); ++z) mix.mode(z) = reduce(std::move(mix.mode(z)), budget, opts);
}

bool is_positive_definite(const LikelihoodComponent& c, const ReductionOptions& opts) {
  return c.L_half.dim() > 0 && c.L_half.diag_ratio() > opts.pd_diag_ratio;
}

GaussianComponent likelihood_to_moment(const LikelihoodComponent& c) {
  const Index n = c.L_half.dim();
  const Matrix& G = c.L_half.matrix();
  // L^{-1} = G^{-1} G^{-T}, so G^{-T} (lower triangular) is a square root of it.
  const Matrix G_inv_t = G.transpose().triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  const Vector t = c.L_half.solve_transposed(c.s);  // G^{-T} s
  const Vector mu = -c.L_half.solve(t);              // -L^{-1} s
  const double log_det_L = c.L_half.log_det();
  const double log_mass =
      -0.5 * c.r + 0.5 * t.squaredNorm() + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) -
      0.5 * log_det_L;
  return GaussianComponent{log_mass, mu, qless_qr(G_inv_t)};
}

LikelihoodComponent moment_to_likelihood(const GaussianComponent& g) {
  const Index n = g.P_half.dim();
  const Matrix& U = g.P_half.matrix();
  const Matrix U_inv_t = U.transpose().triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  const UtFactor G = qless_qr(U_inv_t);  // G^T G = P^{-1}
  const Vector Gmu = G.matrix() * g.mu;
  const Vector s = -(G.matrix().transpose() * Gmu);
  const double log_det_L = -g.P_half.log_det();
  const double r = -2.0 * g.log_w + Gmu.squaredNorm() + static_cast<double>(n) * std::log(2.0 * std::numbers::pi) -
                   log_det_L;
  return LikelihoodComponent{r, s, G};
}

std::vector<LikelihoodComponent> reduce_likelihood(std::vector<LikelihoodComponent> components,
                                                   std::size_t budget, const ReductionOptions& opts) {
  budget = std::max<std::size_t>(budget, 1);
  if (components.size() <= budget) return components;
  std::vector<LikelihoodComponent> out;
  std::vector<LikelihoodComponent> pd;
  for (auto& c : components) {
    if (is_positive_definite(c, opts)) {
      pd.push_back(std::move(c));
    } else {
      out.push_back(std::move(c));
    }
  }
  if (pd.size() <= budget) {
    for (auto& c : pd) out.push_back(std::move(c));
    return out;
  }
  std::vector<GaussianComponent> moments;
  moments.reserve(pd.size());
  for (const auto& c : pd) moments.push_back(likelihood_to_moment(c));
  for (const auto& g : reduce(std::move(moments), budget, opts)) out.push_back(moment_to_likelihood(g));
  return out;
}

std::vector<LikelihoodComponent> merge_identical_likelihoods(std::vector<LikelihoodComponent> components,
                                                             double rel_tol) {
  std::vector<LikelihoodComponent> out;
  out.reserve(components.size());
  for (auto& c : components) {
    bool merged = false;
    for (auto& o : out) {
      const double ts = rel_tol * std::max(1.0, o.s.norm());
      const double tl = rel_tol * std::max(1.0, o.L_half.matrix().norm());
      if ((o.s - c.s).norm() <= ts && (o.L_half.matrix() - c.L_half.matrix()).norm() <= tl) {
        o.r = -2.0 * log_add(-0.5 * o.r, -0.5 * c.r);
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace jmls
