#pragma once

#include "primseg/fitting.hpp"
#include "primseg/types.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>

namespace primseg {

using TypeMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumTypes, Eigen::RowMajor>;
using ParamMatrix = Eigen::Matrix<double, Eigen::Dynamic, kParamDim, Eigen::RowMajor>;

/// Per-point attributes stored column-major by attribute: row i of every
/// matrix belongs to point i.
struct PointAttributes {
  Eigen::MatrixXd descriptors;  ///< n x m semantic descriptors
  TypeMatrix type_dist;         ///< n x 6, rows sum to 1
  ParamMatrix params;           ///< n x 22
  Eigen::VectorXd confidence;   ///< n, in [0,1]

  Eigen::Index size() const { return type_dist.rows(); }
  PrimitiveType argmax_type(Eigen::Index i) const;
  Params point_params(Eigen::Index i) const { return params.row(i).transpose(); }

  static PointAttributes zeros(Eigen::Index n, Eigen::Index m);

  /// Throws when a type row is negative or not normalized.
  void validate() const;
};

inline constexpr int kDescriptorDim = 16;

struct EstimationOptions {
  int k_fit = 64;
  double tau = 0.02;
  double inlier_threshold = 0.01;
  /// Best analytic rms above this routes mass to the B-spline types.
  double bspline_threshold = 0.02;
  FitOptions fit;
};

/// Unit normals from a plane fit on each k-neighborhood, oriented away from
/// the cloud centroid.
Points<double> estimate_normals(const Cloud& cloud, const NeighborGraph& graph);

/// Fits of the four analytic types on one neighborhood.
struct LocalFits {
  std::array<std::optional<FitResult>, kNumAnalyticTypes> fits;
  Eigen::Vector3d eigenvalues;  ///< local covariance, descending
  double mean_neighbor_distance = 0;
  double normal_variation = 0;
  int neighborhood_size = 0;

  double residual(PrimitiveType t) const;
  /// Residual times k^(p/2k), p the type's free parameter count, floored at
  /// 1e-6 of the mean neighbor distance. Orders types like BIC.
  double penalized_residual(PrimitiveType t) const;
  int best() const;  ///< lowest penalized residual; -1 when every fit failed
};

/// Neighborhood of point i: itself plus its first k_fit neighbors.
std::vector<int> neighborhood(const NeighborGraph& graph, Eigen::Index i, int k_fit);

LocalFits fit_neighborhood(const Cloud& cloud, const std::vector<int>& hood, const EstimationOptions& opts);

/// Softmin of residuals; failed fits (infinite residual) receive zero mass.
Eigen::Matrix<double, kNumTypes, 1> softmin_types(const std::array<double, kNumAnalyticTypes>& residuals, double tau);

/// 16-dim descriptor: position, normal, eigen ratios l2/l1 and l3/l1, mean
/// neighbor distance, the four fit residuals, normal variation, two zeros.
Eigen::VectorXd handcrafted_descriptor(const Cloud& cloud, const NeighborGraph& graph, Eigen::Index i,
                                       const EstimationOptions& opts = {});

Eigen::VectorXd descriptor_from_fits(const Cloud& cloud, Eigen::Index i, const LocalFits& fits);

/// Classical per-point estimate of descriptor, type distribution and shape
/// parameters. Requires normals on the cloud (see estimate_normals).
PointAttributes estimate_point_attributes(const Cloud& cloud, const NeighborGraph& graph,
                                          const EstimationOptions& opts = {});

/// Descriptor interchange format: `n m` header, n descriptor rows, n type rows,
/// n parameter rows.
std::string format_attributes(const PointAttributes& attrs);
PointAttributes parse_attributes(const std::string& text, Eigen::Index expected_n = -1);
PointAttributes load_attributes(const std::filesystem::path& path, Eigen::Index expected_n = -1);

}  // namespace primseg
