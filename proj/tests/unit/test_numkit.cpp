#include <cmath>
#include <limits>

#include "jmls/numkit.hpp"
#include "test_util.hpp"

using namespace jmls;
using jmls::test::MatrixNear;

TEST(CholUpper, KnownFactor) {
  Matrix M(2, 2);
  M << 4, 2, 2, 5;
  Matrix F(2, 2);
  F << 2, 1, 0, 2;
  EXPECT_TRUE(MatrixNear(chol_upper(M).matrix(), F, 1e-15));
}

TEST(CholUpper, IdentityAndZero) {
  EXPECT_TRUE(MatrixNear(chol_upper(Matrix::Identity(4, 4)).matrix(), Matrix::Identity(4, 4), 0.0));
  EXPECT_TRUE(MatrixNear(chol_upper(Matrix::Zero(2, 2)).matrix(), Matrix::Zero(2, 2), 1e-300));
}

TEST(CholUpper, SemidefiniteInputGivesExactGram) {
  Matrix G = test::random_matrix(2, 4, 3);
  const Matrix M = G.transpose() * G;  // rank 2
  const UtFactor f = chol_upper(M);
  EXPECT_TRUE(MatrixNear(f.gram(), M, 1e-10 * M.norm()));
}

TEST(CholUpper, RejectsIndefinite) {
  Matrix M(2, 2);
  M << 1, 0, 0, -1;
  try {
    chol_upper(M);
    FAIL() << "expected NotPsd";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPsd);
  }
}

TEST(CholUpper, RandomReconstruction) {
  for (int n = 1; n <= 8; ++n) {
    const Matrix M = test::random_spd(n, 100 + n, 0.0);
    const UtFactor f = chol_upper(M);
    EXPECT_TRUE(MatrixNear(f.gram(), M, 1e-10 * M.norm())) << "n = " << n;
    for (Index i = 0; i < n; ++i) EXPECT_GE(f.matrix()(i, i), 0.0);
  }
}

TEST(QlessQr, Examples) {
  Matrix s(2, 1);
  s << 3, 4;
  EXPECT_NEAR(qless_qr(s).matrix()(0, 0), 5.0, 1e-15);

  Matrix ut(2, 2);
  ut << 2, -1, 0, 3;
  EXPECT_TRUE(MatrixNear(qless_qr(ut).matrix(), ut, 1e-15));

  Matrix tall = Matrix::Zero(3, 2);
  tall(0, 0) = tall(1, 1) = 1;
  EXPECT_TRUE(MatrixNear(qless_qr(tall).matrix(), Matrix::Identity(2, 2), 1e-15));
}

TEST(QlessQr, RandomGram) {
  for (int trial = 0; trial < 20; ++trial) {
    const Index cols = 1 + trial % 16;
    const Index rows = cols + 3 * trial;
    const Matrix S = test::random_matrix(rows, cols, 200 + trial);
    const UtFactor R = qless_qr(S);
    const Matrix G = S.transpose() * S;
    EXPECT_TRUE(MatrixNear(R.gram(), G, 1e-12 * G.norm()));
    EXPECT_EQ(R.matrix().triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm(), 0.0);
  }
}

TEST(QlessQr, WideInputIsPadded) {
  const Matrix S = test::random_matrix(2, 4, 9);
  const UtFactor R = qless_qr(S);
  EXPECT_EQ(R.dim(), 4);
  EXPECT_TRUE(MatrixNear(R.gram(), S.transpose() * S, 1e-12));
}

TEST(WeightedStackQr, Examples) {
  std::vector<WeightedBlock> one{{1.0, Matrix::Identity(2, 2)}};
  EXPECT_TRUE(MatrixNear(weighted_stack_qr(one).matrix(), Matrix::Identity(2, 2), 1e-15));
  std::vector<WeightedBlock> two{{4.0, Matrix::Ones(1, 1)}, {9.0, Matrix::Ones(1, 1)}};
  EXPECT_NEAR(weighted_stack_qr(two).matrix()(0, 0), std::sqrt(13.0), 1e-14);
}

TEST(WeightedStackQr, DimensionMismatch) {
  std::vector<WeightedBlock> bad{{1.0, Matrix::Ones(1, 2)}, {1.0, Matrix::Ones(1, 3)}};
  try {
    weighted_stack_qr(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(WeightedStackQr, GroupingAndPermutationInvariance) {
  std::vector<WeightedBlock> blocks;
  for (int i = 0; i < 10; ++i) blocks.push_back({0.1 + i, test::random_matrix(3, 4, 300 + i)});
  const Matrix all = weighted_stack_qr(blocks).matrix();

  std::vector<WeightedBlock> first(blocks.begin(), blocks.begin() + 5), second(blocks.begin() + 5, blocks.end());
  std::vector<WeightedBlock> halves{{1.0, weighted_stack_qr(first).matrix()}, {1.0, weighted_stack_qr(second).matrix()}};
  EXPECT_TRUE(MatrixNear(weighted_stack_qr(halves).matrix(), all, 1e-10 * all.norm()));

  std::vector<WeightedBlock> reversed(blocks.rbegin(), blocks.rend());
  EXPECT_TRUE(MatrixNear(weighted_stack_qr(reversed).matrix(), all, 1e-10 * all.norm()));

  QrAccumulator acc(4);
  for (const auto& b : blocks) acc.add(b.weight, b.factor);
  EXPECT_TRUE(MatrixNear(acc.finish().matrix(), all, 1e-10 * all.norm()));
}

TEST(LogSumExp, Examples) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> a{0.0, 0.0}, b{-inf, 0.0}, c{1000.0, 1000.0}, d{3.25};
  EXPECT_NEAR(logsumexp(a), std::log(2.0), 1e-15);
  EXPECT_EQ(logsumexp(b), 0.0);
  EXPECT_NEAR(logsumexp(c), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_EQ(logsumexp(d), 3.25);
  try {
    logsumexp(std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(LogSumExp, ShiftInvariance) {
  std::vector<double> v{-3.0, 0.5, 2.0, -10.0};
  const double base = logsumexp(v);
  for (double shift : {-500.0, 7.0, 300.0}) {
    std::vector<double> w = v;
    for (auto& x : w) x += shift;
    EXPECT_NEAR(logsumexp(w), base + shift, 1e-12 * std::max(1.0, std::abs(shift)));
  }
}

TEST(UtFactor, SignConventionAndSolves) {
  Matrix F(2, 2);
  F << -2, 1, 0, 3;
  const UtFactor f(F);
  EXPECT_GE(f.matrix()(0, 0), 0.0);
  EXPECT_TRUE(MatrixNear(f.gram(), F.transpose() * F, 1e-15));
  Vector b(2);
  b << 1, 2;
  EXPECT_TRUE(MatrixNear(f.matrix().transpose() * f.solve_transposed(b), b, 1e-14));
  EXPECT_TRUE(MatrixNear(f.matrix() * f.solve(b), b, 1e-14));
  EXPECT_NEAR(f.log_det(), std::log(36.0), 1e-14);
}
