#pragma once

#include "primseg/types.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace primseg {

enum class FeatureRole { Semantic, Consistency, Smoothness };

std::string_view role_name(FeatureRole role);

struct Feature {
  Eigen::MatrixXd values;  ///< n x m
  FeatureRole role = FeatureRole::Semantic;
  double sigma = 1.0;      ///< entropy bandwidth
};

struct FeatureBundle {
  std::vector<Feature> features;

  Eigen::Index rows() const { return features.empty() ? 0 : features.front().values.rows(); }
  Eigen::Index total_cols() const;
  /// Shared row count, m ≥ 1, positive sigmas, at most one semantic feature.
  void validate() const;
};

/// Log of the kernel density of each row of F,
/// P(x) = (1/n) (2π)^{-m/2} σ^{-m} Σ_j exp(−‖x − F_j‖²/(2σ²)).
Eigen::VectorXd log_density(const Eigen::MatrixXd& F, double sigma);

/// H = −Σ_i P(F_i) log P(F_i). Exact O(n²) evaluation.
double feature_entropy(const Eigen::MatrixXd& F, double sigma);

struct WeightOptions {
  /// Cap on the raw weight 1/H; also used when H ≤ 0.
  double max_raw_weight = 1e3;
};

struct WeightVector {
  Eigen::VectorXd w;          ///< Σ w² = 1
  Eigen::VectorXd entropies;  ///< H per feature
  Eigen::VectorXd raw;        ///< clamped 1/H
  std::vector<std::string> warnings;
};

/// w̄ = 1/H (clamped), w = w̄ / ‖w̄‖.
WeightVector weights_from_entropies(const Eigen::VectorXd& entropies, const WeightOptions& opts = {});
WeightVector compute_weights(const FeatureBundle& bundle, const WeightOptions& opts = {});

/// Column-wise concatenation of w_l F_l.
Eigen::MatrixXd assemble_feature_space(const FeatureBundle& bundle, const Eigen::VectorXd& weights);

}  // namespace primseg
