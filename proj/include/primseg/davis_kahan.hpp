#pragma once

#include "primseg/eigs.hpp"
#include "primseg/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace primseg {

struct DKReport {
  int trial = 0;
  int n = 0;
  int K = 0;
  double rho = 0;
  double procrustes_error = 0;  ///< min_R ‖U R − U^g‖_F
  double relative_error = 0;    ///< procrustes_error / ‖U^g‖_F
  double bound = 0;             ///< sqrt(λ_1) ‖E‖_F / (λ_K − λ_{K+1})
  double eigengap = 0;          ///< λ_K − λ_{K+1} of the ground-truth matrix
  double frobenius_E = 0;
  double param_error_proxy = 0;  ///< sqrt(rho)
};

/// sqrt(λ_1) ‖E‖_F / (λ_K − λ_{K+1}) for descending eigenvalues of the
/// ground-truth matrix. Throws "degenerate gap" when the gap is not positive.
double dk_bound(const Eigen::VectorXd& truth_eigenvalues, double frobenius_E, int K);
double dk_bound(const Eigen::VectorXd& truth_eigenvalues, const Eigen::MatrixXd& E, int K);

/// Compares the top-K embeddings of A_g and A = A_g + E.
DKReport dk_compare(const Eigen::MatrixXd& A_g, const Eigen::MatrixXd& A, int K,
                    EmbeddingScale scale = EmbeddingScale::Amplify, const EigsOptions& opts = {});

/// Equal-block binary ground truth: 1 within each of K blocks of n/K points.
Eigen::MatrixXd block_consistency_matrix(int n, int K);

/// Binary corruption: a random floor(rho n) subset of points each gain
/// ceil(sqrt n) random out-of-block partners with weight 1 (symmetric).
/// In-block weights are left at 1.
Eigen::MatrixXd corrupt_block_matrix(const Eigen::MatrixXd& A_g, int K, double rho, std::uint64_t seed);

/// Runs `trials` independent corruptions; trial t uses seed + t.
std::vector<DKReport> dk_experiment(int n, int K, double rho, int trials, std::uint64_t seed,
                                    EmbeddingScale scale = EmbeddingScale::Amplify);

std::string format_dk_csv(const std::vector<DKReport>& reports);

}  // namespace primseg
