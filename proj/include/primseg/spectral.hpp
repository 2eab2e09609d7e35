#pragma once

#include "primseg/attributes.hpp"
#include "primseg/eigs.hpp"
#include "primseg/geometry.hpp"
#include "primseg/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>

namespace primseg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using TypeSigmas = std::array<double, kNumTypes>;

/// exp(−d²/(2σ²)) for the distance of p to the primitive (t, s). Types
/// without a closed-form distance give 0.
double consistency_weight(const Vec3d& p, PrimitiveType t, const Params& s, double sigma,
                          ConeFormula cone = ConeFormula::Perpendicular);

/// Weight of point p against the argmax primitive of attribute row j.
double consistency_weight(const Vec3d& p, const PointAttributes& attrs, Eigen::Index j, const TypeSigmas& sigmas,
                          ConeFormula cone = ConeFormula::Perpendicular);

/// A(i,j) = (w(p_i, s_j) + w(p_j, s_i)) / 2, unit diagonal.
Eigen::MatrixXd build_consistency_matrix(const Cloud& cloud, const PointAttributes& attrs, const TypeSigmas& sigmas,
                                         Eigen::Index dense_cap = 4096,
                                         ConeFormula cone = ConeFormula::Perpendicular);

/// kNN adjacency weighted by exp(−‖n_i − n_j‖²/(2σ_e²)), symmetrized by the
/// max over both edge directions, zero diagonal.
SparseMatrix build_smoothness_matrix(const Cloud& cloud, const NeighborGraph& graph, double sigma_e);

enum class EmbeddingScale {
  Amplify,    ///< column j scaled by sqrt(λ_1/λ_j)
  Attenuate,  ///< column j scaled by sqrt(λ_j/λ_1)
};

struct SpectralEmbedding {
  Eigen::VectorXd eigenvalues;  ///< λ_1 ≥ … ≥ λ_d, all positive
  Eigen::MatrixXd vectors;      ///< n x d orthonormal eigenvectors
  Eigen::MatrixXd features;     ///< n x d scaled columns
  EmbeddingScale scale = EmbeddingScale::Amplify;

  Eigen::Index dim() const { return features.cols(); }
};

/// Builds the scaled embedding from the first d pairs. Pairs with a
/// non-positive eigenvalue are dropped.
SpectralEmbedding make_embedding(const EigenPairs& pairs, Eigen::Index d, EmbeddingScale scale);

/// Top `d_max` eigenpairs of A as a scaled embedding.
template <typename MatrixType>
SpectralEmbedding leading_eigs(const MatrixType& A, int d_max, EmbeddingScale scale = EmbeddingScale::Amplify,
                               const EigsOptions& opts = {}) {
  return make_embedding(top_eigenpairs(A, d_max, opts), d_max, scale);
}

/// argmax over d in [d_min, d_max] of (λ_d − λ_{d+1})/λ_1, ties to the
/// smaller d. Needs d_max + 1 values; missing trailing values count as 0.
int select_embedding_dim(const Eigen::VectorXd& eigenvalues, int d_min, int d_max);

/// min over orthogonal R of ‖U R − V‖_F.
double procrustes_distance(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V);

}  // namespace primseg
