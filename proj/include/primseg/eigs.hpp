#pragma once

#include "primseg/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>

namespace primseg {

struct EigsOptions {
  /// Orders up to this size use a dense decomposition.
  Eigen::Index dense_threshold = 512;
  std::uint64_t seed = 0x5eed;
  /// Krylov expansion steps before giving up.
  int max_iter = 2000;
  /// Convergence target, relative to the Frobenius norm.
  double tol = 1e-12;
  /// Residual accepted at the iteration cap, relative to the Frobenius norm.
  double accept_tol = 1e-8;
  /// Vectors added per expansion step; 0 picks a size from the request.
  int block = 0;
};

/// Top eigenpairs in descending algebraic order.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  ///< n x count, orthonormal columns
  double max_residual = 0;  ///< max_j ‖A u_j − λ_j u_j‖
  double frobenius = 0;     ///< ‖A‖_F
  int iterations = 0;
  bool dense = false;
};

using MatVec = std::function<void(const Eigen::MatrixXd& x, Eigen::MatrixXd& y)>;

/// Block Krylov solver with Rayleigh-Ritz extraction, full reorthogonalization
/// and thick restart. `apply` computes y = A x for a block x.
EigenPairs krylov_top_eigenpairs(const MatVec& apply, Eigen::Index n, double frobenius, int count,
                                 const EigsOptions& opts);

EigenPairs dense_top_eigenpairs(const Eigen::MatrixXd& A, int count);

/// Max residual ‖A u_j − λ_j u_j‖ over the columns of `pairs`.
double max_residual(const MatVec& apply, const EigenPairs& pairs);

template <typename MatrixType>
MatVec make_matvec(const MatrixType& A) {
  return [&A](const Eigen::MatrixXd& x, Eigen::MatrixXd& y) { y.noalias() = A * x; };
}

/// Leading `count` eigenpairs of a symmetric dense or sparse matrix. Throws
/// "eigensolver stalled" when the residual target is not reached.
template <typename MatrixType>
EigenPairs top_eigenpairs(const MatrixType& A, int count, const EigsOptions& opts = {}) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw Error("matrix is not square", "eigensolver");
  if (count < 1 || count > n) throw Error("requested eigenpair count out of range", "eigensolver");
  if (n <= opts.dense_threshold) {
    EigenPairs out = dense_top_eigenpairs(Eigen::MatrixXd(A), count);
    out.frobenius = A.norm();
    return out;
  }
  return krylov_top_eigenpairs(make_matvec(A), n, A.norm(), count, opts);
}

}  // namespace primseg
