#include "oracles.hpp"
#include "test_util.hpp"

using namespace jmls;
using jmls::test::M1;
using jmls::test::MatrixNear;
namespace oracle = jmls::oracle;

namespace {

struct Pipeline {
  FilterOutput filter;
  BifOutput bif;
  std::vector<JointSmoothedMixture> joint;
};

Pipeline run_all(const JmlsModel& model, const Dataset& d, std::size_t budget = kUnbounded, unsigned threads = 1) {
  Pipeline p;
  p.filter = run_filter(model, d, FilterOptions{budget, {}});
  p.bif = run_bif(model, d, BifOptions{budget, {}});
  SmootherOptions so;
  so.budget = budget;
  so.threads = threads;
  p.joint = run_smoother(model, d, p.filter, p.bif, so);
  return p;
}

}  // namespace

TEST(JointPredict, ScalarExample) {
  TransformedMode tm;
  tm.A_k = M1(0.5);
  tm.Q_half = UtFactor::identity(1);
  const GaussianComponent f{0.0, Vector::Ones(1), UtFactor(M1(2.0))};
  const JointPrediction p = joint_predict(f, tm, Vector::Ones(1));
  EXPECT_TRUE(MatrixNear(p.mu, (Vector(2) << 1.0, 1.5).finished(), 1e-15));
  EXPECT_TRUE(MatrixNear(p.P_half.gram(), (Matrix(2, 2) << 4.0, 2.0, 2.0, 2.0).finished(), 1e-15));
}

TEST(Fuse, UninformativeLikelihoodReturnsPrediction) {
  const JmlsModel model = random_model(2, 1, 1, 1, 3);
  const TransformedMode tm = transform_mode(model.modes[0]);
  const GaussianComponent f{-0.3, test::random_matrix(2, 1, 1), qless_qr(test::random_matrix(2, 2, 2))};
  const JointPrediction p = joint_predict(f, tm, test::random_matrix(2, 1, 3));
  const GaussianComponent g = fuse(p, LikelihoodComponent::uninformative(2), f.log_w, std::log(0.25));
  EXPECT_TRUE(MatrixNear(g.mu, p.mu, 1e-12));
  EXPECT_TRUE(MatrixNear(g.covariance(), p.P_half.gram(), 1e-12));
  EXPECT_NEAR(g.log_w, -0.3 + std::log(0.25), 1e-12);
}

TEST(Fuse, MatchesDenseInformationForm) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index n = 1 + static_cast<Index>(seed % 3);
    const JmlsModel model = random_model(n, 1, 1, 1, seed);
    const TransformedMode tm = transform_mode(model.modes[0]);
    const GaussianComponent f{0.0, test::random_matrix(n, 1, seed), chol_upper(test::random_spd(n, seed + 1))};
    const JointPrediction p = joint_predict(f, tm, test::random_matrix(n, 1, seed + 2));
    const LikelihoodComponent l{1.3, test::random_matrix(n, 1, seed + 3), qless_qr(test::random_matrix(n, n, seed + 4))};
    const GaussianComponent g = fuse(p, l, 0.0, 0.0);

    using oracle::RMatrix;
    using oracle::RVector;
    const RMatrix Pp = oracle::to_real(p.P_half.gram());
    RMatrix Lbig = RMatrix::Zero(2 * n, 2 * n);
    Lbig.bottomRightCorner(n, n) = oracle::to_real(l.L_half.gram());
    RVector gamma = RVector::Zero(2 * n);
    gamma.tail(n) = oracle::to_real(l.s);
    const RMatrix PN = (Pp.inverse() + Lbig).inverse();
    const RVector mu = PN * (Pp.inverse() * oracle::to_real(p.mu) - gamma);
    EXPECT_TRUE(MatrixNear(g.covariance(), oracle::to_double(PN), 1e-9));
    EXPECT_TRUE(MatrixNear(g.mu, oracle::to_double(mu), 1e-9));
    // Mass of N(chi | mu_p, P_p) exp(-1/2 (r + 2 gamma^T chi + chi^T L chi)).
    const RVector mp = oracle::to_real(p.mu);
    const RVector h = Pp.inverse() * mp - gamma;
    const long double ln = -0.5L * l.r - 0.5L * (mp.dot(Pp.inverse() * mp) - h.dot(PN * h)) +
                           0.5L * std::log(PN.determinant() / Pp.determinant());
    EXPECT_NEAR(g.log_w, static_cast<double>(ln), 1e-9);
  }
}

class SmootherBruteForce : public ::testing::TestWithParam<Convention> {};

TEST_P(SmootherBruteForce, PairPosteriorsAndMoments) {
  const JmlsModel model = random_model(1, 1, 1, 2, 29, GetParam());
  const Dataset d = simulate(model, InputSpec{}, 4, 8);
  const Pipeline p = run_all(model, d);
  const oracle::Enumeration e = oracle::enumerate(model, d);
  for (Index k = 0; k < d.length(); ++k) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        const oracle::PairMoments a = oracle::pair_moments(e, 1, k, i, j);
        const oracle::PairMoments b = oracle::pair_moments(p.joint[k], i, j);
        EXPECT_NEAR(static_cast<double>(b.prob), static_cast<double>(a.prob), 1e-9);
        EXPECT_TRUE(MatrixNear(oracle::to_double(b.first), oracle::to_double(a.first), 1e-8));
        EXPECT_TRUE(MatrixNear(oracle::to_double(b.second), oracle::to_double(a.second), 1e-8));
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Conventions, SmootherBruteForce, ::testing::Values(Convention::dynamic, Convention::classic));

TEST(Smoother, TwoFilterMarginalsAgree) {
  const JmlsModel model = random_model(2, 1, 1, 2, 37);
  const Dataset d = simulate(model, InputSpec{}, 6, 9);
  const Pipeline p = run_all(model, d);
  for (Index k = 0; k < d.length(); ++k) {
    const auto a = oracle::mode_moments(marginal_first(p.joint[k]));
    const auto b = oracle::mode_moments(combine_two_filter(p.filter.predicted[k], p.bif.lik[k]));
    for (std::size_t z = 0; z < 2; ++z) {
      EXPECT_NEAR(static_cast<double>(a[z].weight), static_cast<double>(b[z].weight), 1e-8);
      EXPECT_TRUE(MatrixNear(oracle::to_double(a[z].first), oracle::to_double(b[z].first), 1e-8));
      EXPECT_TRUE(MatrixNear(oracle::to_double(a[z].second), oracle::to_double(b[z].second), 1e-8));
    }
    if (k + 1 < d.length()) {
      const auto c = oracle::mode_moments(marginal_second(p.joint[k]));
      const auto n = oracle::mode_moments(marginal_first(p.joint[k + 1]));
      for (std::size_t z = 0; z < 2; ++z) {
        EXPECT_NEAR(static_cast<double>(c[z].weight), static_cast<double>(n[z].weight), 1e-8);
        EXPECT_TRUE(MatrixNear(oracle::to_double(c[z].second), oracle::to_double(n[z].second), 1e-8));
      }
    }
  }
}

TEST(Smoother, SmoothedPriorIsNormalized) {
  const JmlsModel model = random_model(1, 1, 1, 3, 41);
  const Dataset d = simulate(model, InputSpec{}, 10, 2);
  const Pipeline p = run_all(model, d, 3);
  const HybridMixture prior = smoothed_prior(p.joint.front(), 2);
  EXPECT_NEAR(prior.log_total(), 0.0, 1e-12);
  for (std::size_t z = 0; z < 3; ++z) EXPECT_LE(prior.mode(z).size(), 2u);
}

TEST(Smoother, ThreadCountDoesNotChangeResults) {
  const JmlsModel model = random_model(2, 1, 1, 2, 43);
  const Dataset d = simulate(model, InputSpec{}, 30, 3);
  const Pipeline a = run_all(model, d, 3, 1), b = run_all(model, d, 3, 4);
  for (std::size_t k = 0; k < a.joint.size(); ++k) {
    for (std::size_t q = 0; q < a.joint[k].pairs.size(); ++q) {
      ASSERT_EQ(a.joint[k].pairs[q].size(), b.joint[k].pairs[q].size());
      for (std::size_t c = 0; c < a.joint[k].pairs[q].size(); ++c) {
        EXPECT_EQ(a.joint[k].pairs[q][c].log_w, b.joint[k].pairs[q][c].log_w);
        EXPECT_EQ(a.joint[k].pairs[q][c].mu, b.joint[k].pairs[q][c].mu);
      }
    }
  }
}

TEST(Smoother, BudgetAndDropThreshold) {
  const JmlsModel model = random_model(1, 1, 1, 2, 47);
  const Dataset d = simulate(model, InputSpec{}, 20, 4);
  const FilterOutput f = run_filter(model, d, FilterOptions{2, {}});
  const BifOutput bif = run_bif(model, d, BifOptions{2, {}});
  SmootherOptions so;
  so.budget = 1;
  const auto joint = run_smoother(model, d, f, bif, so);
  for (const auto& j : joint) {
    double total = 0.0;
    for (const auto& pair : j.pairs) {
      EXPECT_LE(pair.size(), 1u);
      for (const auto& c : pair) {
        EXPECT_GE(c.log_w, -46.0);
        total += std::exp(c.log_w);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}
