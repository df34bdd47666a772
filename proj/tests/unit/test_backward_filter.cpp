#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace jmls;
using jmls::test::M1;
namespace oracle = jmls::oracle;

namespace {

double log_eval(const std::vector<LikelihoodComponent>& comps, const Vector& x) {
  std::vector<double> v;
  for (const auto& c : comps) v.push_back(c.log_eval(x));
  return logsumexp(v);
}

// Same model with the prior replaced by a point mass at x in mode z only.
JmlsModel pinned(const JmlsModel& model, std::size_t z, const Vector& x) {
  JmlsModel out = model;
  out.prior = HybridMixture(model.m());
  out.prior.mode(z).push_back(GaussianComponent{0.0, x, UtFactor::zero(model.nx)});
  return out;
}

Dataset tail(const Dataset& d, Index k) {
  Dataset out;
  out.u = d.u.bottomRows(d.length() - k);
  out.y = d.y.bottomRows(d.length() - k);
  return out;
}

}  // namespace

TEST(BifInit, ScalarMeasurement) {
  const ModeParams p = ModeParams::from_covariances(M1(1), M1(0), M1(1), M1(0), M1(1), M1(1), M1(0));
  const LikelihoodComponent c = bif_init(p, Vector::Zero(1), Vector::Constant(1, 2.0));
  EXPECT_NEAR(c.L_half.gram()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(c.s(0), -2.0, 1e-15);
  EXPECT_NEAR(c.r, 4.0 + std::log(2.0 * std::numbers::pi), 1e-14);
  for (double x : {-1.0, 0.3, 2.0}) {
    const double expect = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * (2.0 - x) * (2.0 - x);
    EXPECT_NEAR(c.log_eval(Vector::Constant(1, x)), expect, 1e-13);
  }
}

TEST(BifInit, VectorMeasurementDensity) {
  const JmlsModel model = random_model(2, 1, 3, 1, 5);
  const ModeParams& p = model.modes[0];
  const Vector u = Vector::Constant(1, 0.4), y = test::random_matrix(3, 1, 8);
  const LikelihoodComponent c = bif_init(p, u, y);
  const Matrix R = p.R();
  const Eigen::LLT<Matrix> llt(R);
  for (int t = 0; t < 4; ++t) {
    const Vector x = test::random_matrix(2, 1, 100 + t);
    const Vector e = y - p.C * x - p.D * u;
    const double expect = -0.5 * (e.dot(llt.solve(e)) + std::log(R.determinant()) + 3.0 * std::log(2.0 * std::numbers::pi));
    EXPECT_NEAR(c.log_eval(x), expect, 1e-11);
  }
}

TEST(MarginalizeDynamics, MatchesClosedFormIntegral) {
  const JmlsModel model = random_model(2, 1, 1, 1, 9);
  const TransformedMode tm = transform_mode(model.modes[0]);
  LikelihoodComponent next{0.7, test::random_matrix(2, 1, 3), qless_qr(test::random_matrix(3, 2, 4))};
  const Vector b = test::random_matrix(2, 1, 6);
  const LikelihoodComponent out = marginalize_dynamics(next, tm, b);

  using oracle::RMatrix;
  using oracle::RVector;
  const RMatrix Q = oracle::to_real(tm.Q_half.gram()), L = oracle::to_real(next.L_half.gram());
  const RMatrix Qi = Q.inverse();
  const RMatrix P = (Qi + L).inverse();
  for (int t = 0; t < 4; ++t) {
    const Vector x = test::random_matrix(2, 1, 200 + t);
    const RVector mean = oracle::to_real(Vector(tm.A_k * x + b));
    const RVector h = Qi * mean - oracle::to_real(next.s);
    const long double ln = -0.5L * next.r - 0.5L * (mean.dot(Qi * mean) - h.dot(P * h)) +
                           0.5L * std::log(P.determinant() / Q.determinant());
    EXPECT_NEAR(out.log_eval(x), static_cast<double>(ln), 1e-10);
  }
}

TEST(MarginalizeDynamics, UninformativeStaysUninformative) {
  const JmlsModel model = random_model(2, 1, 1, 1, 10);
  const TransformedMode tm = transform_mode(model.modes[0]);
  const LikelihoodComponent out =
      marginalize_dynamics(LikelihoodComponent::uninformative(2), tm, test::random_matrix(2, 1, 1));
  EXPECT_NEAR(out.r, 0.0, 1e-14);
  EXPECT_NEAR(out.s.norm(), 0.0, 1e-14);
  EXPECT_NEAR(out.L_half.matrix().norm(), 0.0, 1e-14);
}

class BifOracle : public ::testing::TestWithParam<Convention> {};

TEST_P(BifOracle, LikelihoodEqualsTailEvidence) {
  const JmlsModel model = random_model(1, 1, 1, 2, 13, GetParam());
  const Dataset d = simulate(model, InputSpec{}, 5, 3);
  const BifOutput bif = run_bif(model, d);
  ASSERT_EQ(bif.lik.size(), 6u);
  for (Index k = 0; k < d.length(); ++k) {
    const Dataset t = tail(d, k);
    for (std::size_t z = 0; z < 2; ++z) {
      for (double xv : {-0.8, 0.1, 1.5}) {
        const Vector x = Vector::Constant(1, xv);
        const double expect = static_cast<double>(oracle::enumerate(pinned(model, z, x), t).loglik);
        EXPECT_NEAR(log_eval(bif.lik[k][z], x), expect, 1e-9) << "k=" << k << " z=" << z;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Conventions, BifOracle, ::testing::Values(Convention::dynamic, Convention::classic));

TEST(Bif, VectorStateSingleMode) {
  const JmlsModel model = random_model(2, 1, 1, 1, 17);
  const Dataset d = simulate(model, InputSpec{}, 8, 4);
  const BifOutput bif = run_bif(model, d);
  for (Index k : {0, 3, 7}) {
    ASSERT_EQ(bif.lik[k][0].size(), 1u);
    const Vector x = test::random_matrix(2, 1, 50 + k);
    const double expect = static_cast<double>(oracle::enumerate(pinned(model, 0, x), tail(d, k)).loglik);
    EXPECT_NEAR(bif.lik[k][0][0].log_eval(x), expect, 1e-9);
  }
}

TEST(Bif, BudgetCapsPositiveDefiniteComponents) {
  const JmlsModel model = random_model(1, 1, 1, 3, 19);
  const Dataset d = simulate(model, InputSpec{}, 25, 5);
  const BifOutput bif = run_bif(model, d, BifOptions{2, {}});
  for (Index k = 0; k + 1 < d.length(); ++k) {
    for (std::size_t z = 0; z < 3; ++z) {
      std::size_t pd = 0;
      for (const auto& c : bif.lik[k][z]) pd += is_positive_definite(c) ? 1 : 0;
      EXPECT_LE(pd, 2u);
    }
  }
}

TEST(Bif, TerminalLikelihoodIsUninformative) {
  const JmlsModel model = random_model(1, 1, 1, 2, 23);
  const Dataset d = simulate(model, InputSpec{}, 4, 6);
  const BifOutput bif = run_bif(model, d);
  for (std::size_t z = 0; z < 2; ++z) {
    ASSERT_EQ(bif.lik[4][z].size(), 1u);
    EXPECT_EQ(bif.lik[4][z][0].r, 0.0);
  }
}
