#include "primseg/spectral.hpp"

#include "primseg/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace primseg {

double consistency_weight(const Vec3d& p, PrimitiveType t, const Params& s, double sigma, ConeFormula cone) {
  if (!is_analytic(t) || !(sigma > 0)) return 0.0;
  const double d = distance_point_primitive(p, t, s, cone);
  if (!std::isfinite(d)) return 0.0;
  return std::exp(-d * d / (2 * sigma * sigma));
}

double consistency_weight(const Vec3d& p, const PointAttributes& attrs, Eigen::Index j, const TypeSigmas& sigmas,
                          ConeFormula cone) {
  const PrimitiveType t = attrs.argmax_type(j);
  return consistency_weight(p, t, attrs.point_params(j), sigmas[static_cast<size_t>(type_code(t))], cone);
}

Eigen::MatrixXd build_consistency_matrix(const Cloud& cloud, const PointAttributes& attrs, const TypeSigmas& sigmas,
                                         Eigen::Index dense_cap, ConeFormula cone) {
  const Eigen::Index n = cloud.size();
  if (attrs.size() != n) throw Error("attribute count does not match the cloud", "consistency");
  if (n > dense_cap)
    throw Error("cloud has " + std::to_string(n) + " points, above the dense cap of " + std::to_string(dense_cap) +
                    "; subsample it first",
                "consistency");
  // W(i,j) = w(p_i, s_j), filled one column (primitive) at a time.
  Eigen::MatrixXd W(n, n);
  std::vector<PrimitiveType> types(static_cast<size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) types[static_cast<size_t>(j)] = attrs.argmax_type(j);
  parallel_for(n, [&](std::ptrdiff_t j) {
    const PrimitiveType t = types[static_cast<size_t>(j)];
    const double sigma = sigmas[static_cast<size_t>(type_code(t))];
    const Params s = attrs.point_params(j);
    for (Eigen::Index i = 0; i < n; ++i) W(i, j) = consistency_weight(cloud.position(i), t, s, sigma, cone);
  });
  Eigen::MatrixXd A = 0.5 * (W + W.transpose());
  A.diagonal().setOnes();
  return A;
}

SparseMatrix build_smoothness_matrix(const Cloud& cloud, const NeighborGraph& graph, double sigma_e) {
  if (!(sigma_e > 0)) throw Error("sigma_e must be positive", "smoothness");
  const Eigen::Index n = cloud.size();
  if (graph.size() != n) throw Error("graph does not match the cloud", "smoothness");
  const Points<double>& N = cloud.normals();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(2 * n * graph.k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < graph.k; ++c) {
      const int j = graph.indices(i, c);
      if (j == i) continue;
      const double w = std::exp(-(N.row(i) - N.row(j)).squaredNorm() / (2 * sigma_e * sigma_e));
      trip.emplace_back(i, j, w);
      trip.emplace_back(j, i, w);
    }
  }
  SparseMatrix A(n, n);
  // Both directions of an edge carry the same weight, so max keeps it once.
  A.setFromTriplets(trip.begin(), trip.end(), [](double a, double b) { return std::max(a, b); });
  A.makeCompressed();
  return A;
}

SpectralEmbedding make_embedding(const EigenPairs& pairs, Eigen::Index d, EmbeddingScale scale) {
  d = std::min<Eigen::Index>(d, pairs.values.size());
  if (pairs.values.size() == 0 || !(pairs.values(0) > 0))
    throw Error("leading eigenvalue is not positive", "embedding");
  const double floor = 1e-12 * pairs.values(0);
  Eigen::Index keep = 0;
  while (keep < d && pairs.values(keep) > floor) ++keep;
  SpectralEmbedding e;
  e.scale = scale;
  e.eigenvalues = pairs.values.head(keep);
  e.vectors = pairs.vectors.leftCols(keep);
  e.features = e.vectors;
  for (Eigen::Index j = 0; j < keep; ++j) {
    const double ratio = e.eigenvalues(0) / e.eigenvalues(j);
    e.features.col(j) *= std::sqrt(scale == EmbeddingScale::Amplify ? ratio : 1.0 / ratio);
  }
  return e;
}

int select_embedding_dim(const Eigen::VectorXd& eigenvalues, int d_min, int d_max) {
  if (d_min < 1 || d_max < d_min) throw Error("invalid embedding dimension range", "embedding");
  if (eigenvalues.size() == 0 || !(eigenvalues(0) > 0)) throw Error("leading eigenvalue is not positive", "embedding");
  auto value = [&](int d) { return d - 1 < eigenvalues.size() ? eigenvalues(d - 1) : 0.0; };
  int best = d_min;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int d = d_min; d <= d_max; ++d) {
    const double gap = (value(d) - value(d + 1)) / eigenvalues(0);
    if (gap > best_gap) {
      best_gap = gap;
      best = d;
    }
  }
  return best;
}

double procrustes_distance(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V) {
  if (U.rows() != V.rows() || U.cols() != V.cols()) throw Error("procrustes shapes differ", "procrustes");
  if (U == V) return 0.0;
  // R = P Q^T for U^T V = P Σ Q^T.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(U.transpose() * V, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd R = svd.matrixU() * svd.matrixV().transpose();
  return (U * R - V).norm();
}

}  // namespace primseg
