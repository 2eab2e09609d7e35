#include "oracles.hpp"

#include "primseg/eigs.hpp"

#include <Eigen/Sparse>
#include <gtest/gtest.h>

using namespace primseg;

namespace {

Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return 0.5 * (a + a.transpose());
}

// Column signs are arbitrary; compare up to sign.
double vector_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::min((a - b).norm(), (a + b).norm());
}

}  // namespace

TEST(Eigs, BlockOnesMatrix) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(7, 7);
  A.topLeftCorner(4, 4).setOnes();
  A.bottomRightCorner(3, 3).setOnes();
  const EigenPairs p = top_eigenpairs(A, 2);
  EXPECT_NEAR(p.values(0), 4.0, 1e-12);
  EXPECT_NEAR(p.values(1), 3.0, 1e-12);
  Eigen::VectorXd ind4 = Eigen::VectorXd::Zero(7), ind3 = Eigen::VectorXd::Zero(7);
  ind4.head(4).setConstant(0.5);
  ind3.tail(3).setConstant(1 / std::sqrt(3.0));
  EXPECT_LT(vector_error(p.vectors.col(0), ind4), 1e-12);
  EXPECT_LT(vector_error(p.vectors.col(1), ind3), 1e-12);
}

TEST(Eigs, Identity) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(20, 20);
  const EigenPairs p = top_eigenpairs(I, 5);
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(p.values(j), 1.0, 1e-12);
  EXPECT_LT((p.vectors.transpose() * p.vectors - Eigen::MatrixXd::Identity(5, 5)).norm(), 1e-12);
  EXPECT_LT(max_residual(make_matvec(I), p), 1e-12);
}

TEST(Eigs, DenseMatchesJacobiOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd A = random_symmetric(100, rng);
    const auto [vals, vecs] = oracle::jacobi_eigen(A);
    const EigenPairs p = top_eigenpairs(A, 5);
    for (int j = 0; j < 5; ++j) {
      EXPECT_NEAR(p.values(j), vals(j), 1e-8);
      EXPECT_LT(vector_error(p.vectors.col(j), vecs.col(j)), 1e-8);
    }
  }
}

TEST(Eigs, KrylovMatchesJacobiOracle) {
  std::mt19937_64 rng(2);
  EigsOptions opts;
  opts.dense_threshold = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd A = random_symmetric(100, rng);
    const auto [vals, vecs] = oracle::jacobi_eigen(A);
    const EigenPairs p = top_eigenpairs(A, 5, opts);
    EXPECT_FALSE(p.dense);
    for (int j = 0; j < 5; ++j) {
      EXPECT_NEAR(p.values(j), vals(j), 1e-8);
      EXPECT_LT(vector_error(p.vectors.col(j), vecs.col(j)), 1e-8);
    }
  }
}

TEST(Eigs, KrylovOnSparseBlocks) {
  // Three dense blocks in a 900-node sparse matrix, above the dense threshold.
  std::vector<Eigen::Triplet<double>> t;
  const int sizes[] = {400, 300, 200};
  int off = 0;
  for (int s : sizes) {
    for (int i = 0; i < s; ++i)
      for (int j = std::max(0, i - 5); j <= std::min(s - 1, i + 5); ++j) t.emplace_back(off + i, off + j, 1.0);
    off += s;
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> A(900, 900);
  A.setFromTriplets(t.begin(), t.end());
  const EigenPairs p = top_eigenpairs(A, 4);
  const EigenPairs d = dense_top_eigenpairs(Eigen::MatrixXd(A), 4);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(p.values(j), d.values(j), 1e-8);
  EXPECT_LT(p.max_residual, 1e-8 * p.frobenius);
}

TEST(Eigs, DeterministicForFixedSeed) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd A = random_symmetric(80, rng);
  EigsOptions opts;
  opts.dense_threshold = 0;
  const EigenPairs a = top_eigenpairs(A, 3, opts), b = top_eigenpairs(A, 3, opts);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.vectors, b.vectors);
}

TEST(Eigs, StallReported) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd A = random_symmetric(200, rng);
  EigsOptions opts;
  opts.dense_threshold = 0;
  opts.max_iter = 1;
  opts.block = 1;
  opts.accept_tol = 1e-300;
  try {
    top_eigenpairs(A, 5, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("eigensolver stalled"), std::string::npos);
  }
}

TEST(Eigs, RejectsBadCount) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_THROW(top_eigenpairs(A, 0), Error);
  EXPECT_THROW(top_eigenpairs(A, 5), Error);
}
