#include "primseg/eigs.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace primseg {

namespace {

/// Orthogonalizes column `v` against the first `k` columns of Q with two
/// passes of classical Gram-Schmidt. Returns the norm left after projection.
double orthogonalize(const Eigen::MatrixXd& Q, Eigen::Index k, Eigen::Ref<Eigen::VectorXd> v) {
  for (int pass = 0; pass < 2; ++pass) {
    if (k == 0) break;
    const Eigen::VectorXd c = Q.leftCols(k).transpose() * v;
    v.noalias() -= Q.leftCols(k) * c;
  }
  return v.norm();
}

class Basis {
 public:
  Basis(const MatVec& apply, Eigen::Index n, Eigen::Index capacity, std::uint64_t seed)
      : apply_(apply), n_(n), Q_(n, capacity), W_(n, capacity), rng_(seed) {}

  Eigen::Index size() const { return k_; }
  Eigen::Index capacity() const { return Q_.cols(); }
  const Eigen::MatrixXd& Q() const { return Q_; }
  const Eigen::MatrixXd& W() const { return W_; }

  /// Appends the orthonormalized columns of `block`. Columns that vanish
  /// under projection are replaced by random directions, so the basis keeps
  /// growing through invariant subspaces and exact multiplicities.
  void extend(Eigen::MatrixXd block) {
    const Eigen::Index first = k_;
    for (Eigen::Index c = 0; c < block.cols() && k_ < std::min(n_, capacity()); ++c) {
      Eigen::VectorXd v = block.col(c);
      double before = v.norm();
      double after = orthogonalize(Q_, k_, v);
      for (int attempt = 0; attempt < 5 && !(after > 1e-10 * before && after > 0); ++attempt) {
        v = random_vector();
        before = v.norm();
        after = orthogonalize(Q_, k_, v);
      }
      if (!(after > 1e-10 * before && after > 0)) break;
      Q_.col(k_++) = v / after;
    }
    if (k_ > first) {
      Eigen::MatrixXd y(n_, k_ - first);
      apply_(Q_.middleCols(first, k_ - first), y);
      W_.middleCols(first, k_ - first) = y;
    }
  }

  /// Replaces the basis by Q Y, keeping W = A Q consistent.
  void compress(const Eigen::MatrixXd& Y) {
    const Eigen::Index keep = Y.cols();
    const Eigen::MatrixXd q = Q_.leftCols(k_) * Y;
    const Eigen::MatrixXd w = W_.leftCols(k_) * Y;
    Q_.leftCols(keep) = q;
    W_.leftCols(keep) = w;
    k_ = keep;
  }

  Eigen::MatrixXd random_block(Eigen::Index cols) {
    Eigen::MatrixXd b(n_, cols);
    for (Eigen::Index c = 0; c < cols; ++c) b.col(c) = random_vector();
    return b;
  }

 private:
  Eigen::VectorXd random_vector() {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n_);
    for (Eigen::Index i = 0; i < n_; ++i) v(i) = g(rng_);
    return v;
  }

  const MatVec& apply_;
  Eigen::Index n_;
  Eigen::MatrixXd Q_, W_;
  Eigen::Index k_ = 0;
  std::mt19937_64 rng_;
};

struct Ritz {
  Eigen::VectorXd values;  ///< descending
  Eigen::MatrixXd coeffs;  ///< columns in the same order
};

Ritz rayleigh_ritz(const Basis& basis) {
  const Eigen::Index k = basis.size();
  Eigen::MatrixXd T = basis.Q().leftCols(k).transpose() * basis.W().leftCols(k);
  T = 0.5 * (T + T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

}  // namespace

EigenPairs dense_top_eigenpairs(const Eigen::MatrixXd& A, int count) {
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw Error("eigensolver stalled: dense decomposition failed", "eigensolver");
  EigenPairs out;
  out.values = es.eigenvalues().tail(count).reverse();
  out.vectors = es.eigenvectors().rightCols(count).rowwise().reverse();
  out.dense = true;
  out.iterations = 0;
  Eigen::MatrixXd R = A * out.vectors - out.vectors * out.values.asDiagonal();
  out.max_residual = count > 0 ? R.colwise().norm().maxCoeff() : 0.0;
  return out;
}

double max_residual(const MatVec& apply, const EigenPairs& pairs) {
  Eigen::MatrixXd y(pairs.vectors.rows(), pairs.vectors.cols());
  apply(pairs.vectors, y);
  y -= pairs.vectors * pairs.values.asDiagonal();
  return y.cols() ? y.colwise().norm().maxCoeff() : 0.0;
}

EigenPairs krylov_top_eigenpairs(const MatVec& apply, Eigen::Index n, double frobenius, int count,
                                 const EigsOptions& opts) {
  if (count < 1 || count > n) throw Error("requested eigenpair count out of range", "eigensolver");
  const Eigen::Index b = opts.block > 0 ? opts.block : std::clamp<Eigen::Index>(count, 4, 16);
  const Eigen::Index capacity = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * count + 3 * b, count + 40));
  const Eigen::Index keep = std::min<Eigen::Index>(capacity - b, count + b);
  const double target = opts.tol * frobenius;

  Basis basis(apply, n, capacity, opts.seed);
  basis.extend(basis.random_block(std::min(b, capacity)));

  EigenPairs out;
  Ritz ritz;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    ritz = rayleigh_ritz(basis);
    const Eigen::Index have = std::min<Eigen::Index>(count, basis.size());
    const Eigen::MatrixXd Y = ritz.coeffs.leftCols(have);
    const Eigen::MatrixXd X = basis.Q().leftCols(basis.size()) * Y;
    Eigen::MatrixXd R = basis.W().leftCols(basis.size()) * Y - X * ritz.values.head(have).asDiagonal();
    const Eigen::VectorXd norms = R.colwise().norm();
    const double worst = have ? norms.maxCoeff() : std::numeric_limits<double>::infinity();

    const bool complete = basis.size() >= n;
    if (complete || (have == count && worst <= target)) break;

    std::vector<Eigen::Index> pending;
    for (Eigen::Index j = 0; j < have && static_cast<Eigen::Index>(pending.size()) < b; ++j)
      if (norms(j) > target) pending.push_back(j);
    Eigen::MatrixXd next(n, static_cast<Eigen::Index>(pending.size()));
    for (size_t c = 0; c < pending.size(); ++c) next.col(static_cast<Eigen::Index>(c)) = R.col(pending[c]);
    if (next.cols() == 0) next = basis.random_block(b);

    if (capacity < n && basis.size() + b > capacity) basis.compress(ritz.coeffs.leftCols(std::min(keep, basis.size())));
    basis.extend(next);
  }

  if (ritz.coeffs.rows() != basis.size()) ritz = rayleigh_ritz(basis);
  const Eigen::Index have = std::min<Eigen::Index>(count, basis.size());
  out.values = ritz.values.head(have);
  out.vectors = basis.Q().leftCols(basis.size()) * ritz.coeffs.leftCols(have);
  for (Eigen::Index j = 0; j < have; ++j) out.vectors.col(j).normalize();
  out.iterations = it;
  out.frobenius = frobenius;
  out.max_residual = have == count ? max_residual(apply, out) : std::numeric_limits<double>::infinity();
  if (!(out.max_residual <= opts.accept_tol * frobenius)) {
    std::ostringstream msg;
    msg << "eigensolver stalled: residual " << out.max_residual << " after " << it << " iterations";
    throw Error(msg.str(), "eigensolver");
  }
  return out;
}

}  // namespace primseg
