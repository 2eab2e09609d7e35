#include "primseg/davis_kahan.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace primseg {

double dk_bound(const Eigen::VectorXd& truth_eigenvalues, double frobenius_E, int K) {
  if (K < 1 || K >= truth_eigenvalues.size()) throw Error("need K+1 eigenvalues for the bound", "davis-kahan");
  const double gap = truth_eigenvalues(K - 1) - truth_eigenvalues(K);
  if (!(gap > 0)) throw Error("degenerate gap", "davis-kahan");
  return std::sqrt(std::max(truth_eigenvalues(0), 0.0)) * frobenius_E / gap;
}

double dk_bound(const Eigen::VectorXd& truth_eigenvalues, const Eigen::MatrixXd& E, int K) {
  return dk_bound(truth_eigenvalues, E.norm(), K);
}

DKReport dk_compare(const Eigen::MatrixXd& A_g, const Eigen::MatrixXd& A, int K, EmbeddingScale scale,
                    const EigsOptions& opts) {
  if (A.rows() != A_g.rows() || A.cols() != A_g.cols()) throw Error("matrix shapes differ", "davis-kahan");
  DKReport r;
  r.n = static_cast<int>(A.rows());
  r.K = K;
  r.frobenius_E = (A - A_g).norm();
  const EigenPairs truth = top_eigenpairs(A_g, K + 1, opts);
  // An unperturbed matrix shares the ground-truth eigenpairs exactly.
  const EigenPairs pert = r.frobenius_E == 0 ? truth : top_eigenpairs(A, K, opts);
  const SpectralEmbedding Ug = make_embedding(truth, K, scale);
  const SpectralEmbedding U = make_embedding(pert, K, scale);
  if (Ug.dim() != K || U.dim() != K) throw Error("embedding lost rank", "davis-kahan");
  r.eigengap = truth.values(K - 1) - truth.values(K);
  r.bound = dk_bound(truth.values, r.frobenius_E, K);
  r.procrustes_error = procrustes_distance(U.features, Ug.features);
  r.relative_error = r.procrustes_error / Ug.features.norm();
  return r;
}

Eigen::MatrixXd block_consistency_matrix(int n, int K) {
  if (K < 1 || n < K || n % K != 0) throw Error("K must divide n", "davis-kahan");
  const int size = n / K;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < K; ++b) A.block(b * size, b * size, size, size).setOnes();
  return A;
}

Eigen::MatrixXd corrupt_block_matrix(const Eigen::MatrixXd& A_g, int K, double rho, std::uint64_t seed) {
  if (!(rho >= 0 && rho < 1)) throw Error("rho must lie in [0, 1)", "davis-kahan");
  const int n = static_cast<int>(A_g.rows());
  const int size = n / K;
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int corrupted = static_cast<int>(std::floor(rho * n));
  const int partners = std::min(static_cast<int>(std::ceil(std::sqrt(double(n)))), n - size);

  Eigen::MatrixXd A = A_g;
  std::vector<int> outside;
  for (int c = 0; c < corrupted; ++c) {
    const int i = order[static_cast<size_t>(c)];
    const int block = i / size;
    outside.clear();
    for (int j = 0; j < n; ++j)
      if (j / size != block) outside.push_back(j);
    for (int p = 0; p < partners; ++p) {
      std::uniform_int_distribution<size_t> pick(static_cast<size_t>(p), outside.size() - 1);
      std::swap(outside[static_cast<size_t>(p)], outside[pick(rng)]);
      const int j = outside[static_cast<size_t>(p)];
      A(i, j) = 1;
      A(j, i) = 1;
    }
  }
  return A;
}

std::vector<DKReport> dk_experiment(int n, int K, double rho, int trials, std::uint64_t seed, EmbeddingScale scale) {
  if (trials < 0) throw Error("trial count must be nonnegative", "davis-kahan");
  const Eigen::MatrixXd A_g = block_consistency_matrix(n, K);
  std::vector<DKReport> out;
  out.reserve(static_cast<size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const Eigen::MatrixXd A = corrupt_block_matrix(A_g, K, rho, seed + static_cast<std::uint64_t>(t));
    DKReport r = dk_compare(A_g, A, K, scale);
    r.trial = t;
    r.rho = rho;
    r.param_error_proxy = std::sqrt(rho);
    out.push_back(r);
  }
  return out;
}

std::string format_dk_csv(const std::vector<DKReport>& reports) {
  std::ostringstream out;
  out << std::setprecision(12);
  out << "trial,n,K,rho,procrustes_error,relative_error,bound,eigengap,frobenius_E\n";
  for (const auto& r : reports)
    out << r.trial << ',' << r.n << ',' << r.K << ',' << r.rho << ',' << r.procrustes_error << ','
        << r.relative_error << ',' << r.bound << ',' << r.eigengap << ',' << r.frobenius_E << '\n';
  return out.str();
}

}  // namespace primseg
