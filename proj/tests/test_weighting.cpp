#include "oracles.hpp"

#include "primseg/weighting.hpp"

#include <gtest/gtest.h>

using namespace primseg;

namespace {

// Direct double-loop entropy.
double brute_entropy(const Eigen::MatrixXd& F, double sigma) {
  const Eigen::Index n = F.rows();
  const double m = double(F.cols());
  double h = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0;
    for (Eigen::Index j = 0; j < n; ++j) s += std::exp(-(F.row(i) - F.row(j)).squaredNorm() / (2 * sigma * sigma));
    const double p = s / (double(n) * std::pow(2 * M_PI, m / 2) * std::pow(sigma, m));
    h -= p * std::log(p);
  }
  return h;
}

Eigen::MatrixXd uniform_box(int n, int m, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd F(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) F(i, j) = u(rng);
  return F;
}

Eigen::MatrixXd two_clusters(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 0.01);
  Eigen::MatrixXd F(n, 2);
  for (int i = 0; i < n; ++i) {
    const double c = i < n / 2 ? 0.0 : 1.0;
    F.row(i) << c + g(rng), c + g(rng);
  }
  return F;
}

}  // namespace

TEST(Entropy, SinglePoint) {
  const Eigen::MatrixXd F = Eigen::MatrixXd::Zero(1, 1);
  EXPECT_NEAR(std::exp(log_density(F, 1.0)(0)), 0.39894228, 1e-8);
  EXPECT_NEAR(feature_entropy(F, 1.0), 0.3666034339854198, 1e-12);
}

TEST(Entropy, MatchesDirectEvaluation) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd F = uniform_box(300, 3, -1, 1, rng);
  for (double sigma : {0.1, 0.5, 2.0}) EXPECT_NEAR(feature_entropy(F, sigma), brute_entropy(F, sigma), 1e-10);
}

TEST(Entropy, ClusteredBelowUniform) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd C = two_clusters(200, rng);
  const Eigen::RowVector2d lo = C.colwise().minCoeff(), hi = C.colwise().maxCoeff();
  std::uniform_real_distribution<double> ux(lo(0), hi(0)), uy(lo(1), hi(1));
  Eigen::MatrixXd U(200, 2);
  for (int i = 0; i < 200; ++i) U.row(i) << ux(rng), uy(rng);
  EXPECT_LT(feature_entropy(C, 0.1), feature_entropy(U, 0.1));
}

TEST(Entropy, RigidMotionInvariant) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd F = uniform_box(150, 3, -1, 1, rng);
  const Eigen::Matrix3d R = oracle::random_rotation(rng);
  const Eigen::MatrixXd G = (F * R.transpose()).rowwise() + Eigen::RowVector3d(3, -2, 7);
  EXPECT_NEAR(feature_entropy(F, 0.3), feature_entropy(G, 0.3), 1e-10);
}

TEST(Weights, Examples) {
  const WeightVector eq = weights_from_entropies(Eigen::Vector2d(0.7, 0.7));
  EXPECT_NEAR(eq.w(0), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(eq.w(1), 1 / std::sqrt(2.0), 1e-15);
  const WeightVector w = weights_from_entropies(Eigen::Vector2d(1, 2));
  EXPECT_DOUBLE_EQ(w.raw(0), 1.0);
  EXPECT_DOUBLE_EQ(w.raw(1), 0.5);
  EXPECT_NEAR(w.w(0), 2 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(w.w(1), 1 / std::sqrt(5.0), 1e-15);
  EXPECT_TRUE(w.warnings.empty());
}

TEST(Weights, NonPositiveEntropyClamped) {
  const WeightVector w = weights_from_entropies(Eigen::Vector3d(-0.2, 0.5, 1e-5));
  EXPECT_EQ(w.raw(0), 1e3);
  EXPECT_EQ(w.raw(2), 1e3);
  EXPECT_DOUBLE_EQ(w.raw(1), 2.0);
  ASSERT_EQ(w.warnings.size(), 1u);
  EXPECT_EQ(w.warnings[0], "raw weight clamped to 1000 for features 0,2");
  EXPECT_NEAR(w.w.squaredNorm(), 1.0, 1e-12);
}

TEST(Weights, UnitNormAndScaleInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd h(7);
    for (int l = 0; l < 7; ++l) h(l) = u(rng);
    const WeightVector a = weights_from_entropies(h), b = weights_from_entropies(3.7 * h);
    EXPECT_NEAR(a.w.squaredNorm(), 1.0, 1e-9);
    EXPECT_LT((a.w - b.w).norm(), 1e-12);
  }
}

TEST(Weights, ClusteredFeatureWins) {
  std::mt19937_64 rng(5);
  FeatureBundle b;
  b.features.push_back({two_clusters(200, rng), FeatureRole::Consistency, 0.1});
  b.features.push_back({uniform_box(200, 2, -0.01, 1.01, rng), FeatureRole::Consistency, 0.1});
  const WeightVector w = compute_weights(b);
  EXPECT_GT(w.w(0), w.w(1));
}

TEST(Bundle, Validation) {
  FeatureBundle b;
  EXPECT_THROW(b.validate(), Error);
  b.features.push_back({Eigen::MatrixXd::Zero(5, 2), FeatureRole::Semantic, 1.0});
  b.features.push_back({Eigen::MatrixXd::Zero(5, 1), FeatureRole::Semantic, 1.0});
  EXPECT_THROW(b.validate(), Error);
  b.features[1].role = FeatureRole::Smoothness;
  EXPECT_NO_THROW(b.validate());
  b.features[1].values = Eigen::MatrixXd::Zero(4, 1);
  EXPECT_THROW(b.validate(), Error);
  b.features[1].values = Eigen::MatrixXd::Zero(5, 1);
  b.features[1].sigma = 0;
  EXPECT_THROW(b.validate(), Error);
}

TEST(Assemble, SingleFeatureIdentity) {
  std::mt19937_64 rng(6);
  FeatureBundle b;
  b.features.push_back({uniform_box(10, 3, 0, 1, rng), FeatureRole::Semantic, 1.0});
  EXPECT_EQ(assemble_feature_space(b, Eigen::VectorXd::Ones(1)), b.features[0].values);
}

TEST(Assemble, WeightedRowMetric) {
  std::mt19937_64 rng(7);
  FeatureBundle b;
  b.features.push_back({uniform_box(30, 4, -1, 1, rng), FeatureRole::Semantic, 1.0});
  b.features.push_back({uniform_box(30, 1, -1, 1, rng), FeatureRole::Consistency, 1.0});
  b.features.push_back({uniform_box(30, 2, -1, 1, rng), FeatureRole::Smoothness, 1.0});
  const Eigen::Vector3d w(0.2, 0.9, 0.4);
  const Eigen::MatrixXd X = assemble_feature_space(b, w);
  ASSERT_EQ(X.cols(), 7);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      double expect = 0;
      for (int l = 0; l < 3; ++l)
        expect += w(l) * w(l) * (b.features[l].values.row(i) - b.features[l].values.row(j)).squaredNorm();
      EXPECT_NEAR((X.row(i) - X.row(j)).squaredNorm(), expect, 1e-12);
    }
  EXPECT_THROW(assemble_feature_space(b, Eigen::Vector2d(1, 1)), Error);
}
