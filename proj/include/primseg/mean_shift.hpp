#pragma once

#include "primseg/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace primseg {

struct MeanShiftOptions {
  double bandwidth = 1.0;
  int max_iter = 300;
  /// Convergence when a seed moves less than tol_factor * bandwidth.
  double tol_factor = 1e-4;
  /// Modes closer than merge_factor * bandwidth are merged.
  double merge_factor = 0.5;
  /// Clusters below this size are dissolved into the nearest surviving mode.
  int min_size = 20;
};

struct ClusterResult {
  std::vector<int> labels;  ///< in [0, count), numbered by first appearance
  Eigen::MatrixXd modes;    ///< count x M
  std::vector<int> sizes;

  int count() const { return static_cast<int>(sizes.size()); }
};

/// Gaussian-kernel mean-shift seeded at every row of X.
ClusterResult mean_shift(const Eigen::MatrixXd& X, const MeanShiftOptions& opts);

/// Converged position of every seed, before merging.
Eigen::MatrixXd mean_shift_modes(const Eigen::MatrixXd& X, const MeanShiftOptions& opts);

/// Median of the n(n−1)/2 pairwise row distances.
double median_pairwise_distance(const Eigen::MatrixXd& X);

}  // namespace primseg
