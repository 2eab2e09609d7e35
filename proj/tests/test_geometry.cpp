#include "oracles.hpp"

#include "primseg/geometry.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace primseg;

namespace {

const PrimitiveType kAnalytic[] = {PrimitiveType::Plane, PrimitiveType::Sphere, PrimitiveType::Cylinder,
                                   PrimitiveType::Cone};

Points<double> random_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2, 3);
  Points<double> p(n, 3);
  for (int i = 0; i < n; ++i) p.row(i) << u(rng), u(rng), u(rng);
  return p;
}

double brute_diameter(const Points<double>& p) {
  double best = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = i + 1; j < p.rows(); ++j) best = std::max(best, (p.row(i) - p.row(j)).norm());
  return best;
}

}  // namespace

TEST(Distance, PlaneExample) {
  EXPECT_DOUBLE_EQ(distance_point_primitive<double>({0, 0, 2}, PrimitiveType::Plane, plane_params<double>({0, 0, 1}, 1)),
                   1.0);
}

TEST(Distance, SphereExample) {
  EXPECT_DOUBLE_EQ(
      distance_point_primitive<double>({3, 0, 0}, PrimitiveType::Sphere, sphere_params<double>({0, 0, 0}, 1)), 2.0);
}

TEST(Distance, CylinderIgnoresAxialComponent) {
  const Params s = cylinder_params<double>({0, 0, 1}, {0, 0, 0}, 1);
  EXPECT_DOUBLE_EQ(distance_point_primitive<double>({2, 0, 5}, PrimitiveType::Cylinder, s), 1.0);
}

TEST(Distance, ConePerpendicularAndCosineVariants) {
  const Params s = cone_params<double>({0, 0, 0}, {0, 0, 1}, M_PI / 4);
  const Vec3d p(1, 0, 1);
  EXPECT_NEAR(distance_point_primitive(p, PrimitiveType::Cone, s), 0.0, 1e-12);
  EXPECT_NEAR(distance_point_primitive(p, PrimitiveType::Cone, s, ConeFormula::Cosine), std::sqrt(2.0), 1e-12);
}

TEST(Distance, ConeApexIsOnSurface) {
  const Params s = cone_params<double>({1, 2, 3}, {0, 1, 0}, 0.3);
  EXPECT_EQ(distance_point_primitive<double>({1, 2, 3}, PrimitiveType::Cone, s), 0.0);
}

TEST(Distance, ConeOnAxisPoint) {
  const double theta = 0.4, L = 2.5;
  const Params s = cone_params<double>({0, 0, 0}, {0, 0, 1}, theta);
  EXPECT_NEAR(distance_point_primitive<double>({0, 0, L}, PrimitiveType::Cone, s), L * std::sin(theta), 1e-12);
}

TEST(Distance, ZeroOnSynthesizedSurfacePoints) {
  std::mt19937_64 rng(11);
  for (PrimitiveType t : kAnalytic) {
    for (int trial = 0; trial < 200; ++trial) {
      const Params s = oracle::random_params(t, rng);
      const Vec3d p = oracle::point_on(t, s, rng);
      EXPECT_NEAR(distance_point_primitive(p, t, s), 0.0, 1e-9) << type_name(t);
    }
  }
}

TEST(Distance, RigidMotionInvariance) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2, 2);
  for (PrimitiveType t : kAnalytic) {
    for (int trial = 0; trial < 100; ++trial) {
      const Params s = oracle::random_params(t, rng);
      const Vec3d p(u(rng), u(rng), u(rng));
      const Eigen::Matrix3d R = oracle::random_rotation(rng);
      const Vec3d tr(u(rng), u(rng), u(rng));
      const double before = distance_point_primitive(p, t, s);
      const double after = distance_point_primitive<double>(R * p + tr, t, transform_params(t, s, R, tr));
      EXPECT_NEAR(before, after, 1e-9) << type_name(t);
    }
  }
}

TEST(Distance, PlaneOffsetAlongNormal) {
  std::mt19937_64 rng(13);
  const Params s = oracle::random_params(PrimitiveType::Plane, rng);
  const Vec3d n = s.segment<3>(slot::plane_n);
  const Vec3d p = oracle::point_on(PrimitiveType::Plane, s, rng) + 0.37 * n;
  EXPECT_NEAR(distance_point_primitive(p, PrimitiveType::Plane, s), 0.37, 1e-12);
}

TEST(Distance, BSplineWithoutPatchThrows) {
  Primitive prim;
  prim.type = PrimitiveType::BSplineOpen;
  EXPECT_THROW(distance({0, 0, 0}, prim), Error);
}

TEST(Normalize, CubeCorners) {
  Points<double> p(8, 3);
  int r = 0;
  for (int x : {-1, 1})
    for (int y : {-1, 1})
      for (int z : {-1, 1}) p.row(r++) << x, y, z;
  const NormalizedCloud nc = normalize_cloud(Cloud(p));
  EXPECT_NEAR(nc.transform.scale, 1.0 / (2 * std::sqrt(3.0)), 1e-12);
  EXPECT_NEAR(nc.transform.translation.norm(), 0.0, 1e-12);
  EXPECT_NEAR(brute_diameter(nc.cloud.positions()), 1.0, 1e-12);
}

TEST(Normalize, DegenerateCloudThrows) {
  Points<double> p(5, 3);
  p.rowwise() = Eigen::RowVector3d(1, 2, 3);
  try {
    normalize_cloud(Cloud(p));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "degenerate cloud");
  }
}

TEST(Normalize, EmptyCloudThrows) {
  EXPECT_THROW(Cloud(Points<double>(0, 3)), Error);
}

TEST(Normalize, RandomCloudAgainstBruteForce) {
  const Points<double> p = random_points(100, 3);
  const NormalizedCloud nc = normalize_cloud(Cloud(p));
  EXPECT_LT(nc.cloud.positions().colwise().mean().norm(), 1e-9);
  EXPECT_NEAR(brute_diameter(nc.cloud.positions()), 1.0, 1e-6);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    EXPECT_LT((nc.transform.apply(p.row(i).transpose()) - nc.cloud.position(i)).norm(), 1e-12);
}

TEST(Normalize, InverseRoundTrip) {
  const Points<double> p = random_points(300, 4);
  const NormalizedCloud nc = normalize_cloud(Cloud(p));
  const Cloud back = apply_inverse(nc.cloud, nc.transform);
  EXPECT_LT((back.positions() - p).cwiseAbs().maxCoeff(), 1e-9);
  const NormalizeTransform inv = nc.transform.inverse();
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    EXPECT_LT((inv.apply(nc.cloud.position(i)) - p.row(i).transpose()).norm(), 1e-9);
}

TEST(Normalize, TransformParamsKeepsSurfacePoints) {
  std::mt19937_64 rng(5);
  NormalizeTransform t;
  t.translation = Vec3d(0.3, -1.2, 2.0);
  t.scale = 0.37;
  for (PrimitiveType type : kAnalytic) {
    const Params s = oracle::random_params(type, rng);
    const Params s2 = transform_params(type, s, t);
    EXPECT_TRUE(params_valid(type, s2));
    for (int k = 0; k < 20; ++k) {
      const Vec3d p = oracle::point_on(type, s, rng);
      EXPECT_NEAR(distance_point_primitive(t.apply(p), type, s2), 0.0, 1e-9) << type_name(type);
    }
  }
}

TEST(PointCloudType, NormalsAreRenormalized) {
  Points<double> p = random_points(4, 6), n(4, 3);
  n << 2, 0, 0, 0, 3, 0, 0, 0, 0.5, 1, 1, 1;
  const Cloud c(p, n);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(c.normal(i).norm(), 1.0, 1e-12);
}

TEST(PointCloudType, RejectsNonFinite) {
  Points<double> p = random_points(3, 7);
  p(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Cloud{p}, Error);
}

TEST(Knn, CollinearExample) {
  Points<double> p(3, 3);
  p << 0, 0, 0, 1, 0, 0, 3, 0, 0;
  const NeighborGraph g = knn_graph(Cloud(p), 1);
  EXPECT_EQ(g.indices(0, 0), 1);
  EXPECT_EQ(g.indices(1, 0), 0);
  EXPECT_EQ(g.indices(2, 0), 1);
}

TEST(Knn, KClampedToNMinusOne) {
  const NeighborGraph g = knn_graph(Cloud(random_points(6, 8)), 10);
  EXPECT_EQ(g.indices.cols(), 5);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NE(g.indices(i, j), i);
}

TEST(Knn, MatchesBruteForceRanking) {
  const Points<double> p = random_points(500, 9);
  const NeighborGraph g = knn_graph(Cloud(p), 50);
  for (int i = 0; i < 500; ++i) {
    const auto ref = oracle::brute_knn(p, i, 50);
    for (int j = 0; j < 50; ++j) {
      ASSERT_EQ(g.indices(i, j), ref[static_cast<size_t>(j)]) << "point " << i;
      EXPECT_NEAR(g.distances(i, j), (p.row(i) - p.row(ref[static_cast<size_t>(j)])).norm(), 1e-12);
    }
  }
}

TEST(Knn, TiesBrokenByLowerIndex) {
  // Integer lattice: many equal distances.
  Points<double> p(27, 3);
  int r = 0;
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      for (int z = 0; z < 3; ++z) p.row(r++) << x, y, z;
  const NeighborGraph g = knn_graph(Cloud(p), 8);
  for (int i = 0; i < 27; ++i) {
    const auto ref = oracle::brute_knn(p, i, 8);
    for (int j = 0; j < 8; ++j) EXPECT_EQ(g.indices(i, j), ref[static_cast<size_t>(j)]);
  }
}

TEST(Knn, KdTreeNearestExcludesSelfOnRequest) {
  const Points<double> p = random_points(200, 10);
  const KdTree tree(p);
  for (int i = 0; i < 200; i += 7) {
    EXPECT_EQ(tree.nearest(p.row(i).transpose()).index, i);
    EXPECT_EQ(tree.knn(p.row(i).transpose(), 1, i).front().index, oracle::brute_knn(p, i, 1).front());
  }
}

TEST(Fps, DeterministicAndSpread) {
  const Points<double> p = random_points(400, 11);
  const auto a = farthest_point_sample(p, 50), b = farthest_point_sample(p, 50);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 50u);
  EXPECT_EQ(a.front(), 0);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
  // Second pick is the farthest point from the first.
  int far = 0;
  for (int i = 0; i < 400; ++i)
    if ((p.row(i) - p.row(0)).norm() > (p.row(far) - p.row(0)).norm()) far = i;
  EXPECT_EQ(a[1], far);
}
