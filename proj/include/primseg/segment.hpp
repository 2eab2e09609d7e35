#pragma once

#include "primseg/attributes.hpp"
#include "primseg/mean_shift.hpp"
#include "primseg/segmentation.hpp"
#include "primseg/spectral.hpp"
#include "primseg/weighting.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace primseg {

/// Tunable hyperparameters of the clustering pipeline.
struct HyperParams {
  /// Kernel width of the consistency weight, per primitive type.
  TypeSigmas sigma_per_type{0.02, 0.02, 0.02, 0.02, 0.02, 0.02};
  /// Normal-difference width of the smoothness weight.
  double sigma_e = 0.5;
  /// Entropy bandwidths, as multiples of each feature's RMS spread.
  double sigma_semantic = 1.5;
  double sigma_consistency = 0.5;
  double sigma_smoothness = 20.0;
  /// Fixed mean-shift bandwidth; 0 uses bandwidth_factor x median distance.
  double bandwidth = 0;
  double bandwidth_factor = 0.25;
  int d_min = 1;
  int d_max = 12;
};

struct PipelineConfig {
  HyperParams hp;
  Eigen::Index dense_cap = 4096;
  int k = 50;
  EstimationOptions estimation;
  ConeFormula cone = ConeFormula::Perpendicular;
  EmbeddingScale scale = EmbeddingScale::Amplify;
  MeanShiftOptions mean_shift;  ///< bandwidth is filled in by the pipeline
  WeightOptions weights;
  FitOptions fit;
  bool normalize = true;
  /// Merge kNN-adjacent segments of one analytic type whose union one
  /// primitive fits within fit.inlier_threshold.
  bool merge_adjacent = true;
  int merge_k = 8;
  std::uint64_t seed = 0;
};

/// Intermediate products of one pipeline run.
struct PipelineTrace {
  std::vector<int> working;  ///< indices of the working subsample
  SpectralEmbedding consistency;
  SpectralEmbedding smoothness;
  FeatureBundle bundle;
  WeightVector weights;
  double bandwidth = 0;
  ClusterResult clusters;
  std::vector<std::string> warnings;
};

/// Working-set features up to and including the weighted feature space.
struct FeatureStage {
  Cloud full;                ///< normalized input cloud with normals
  PointAttributes full_attrs;
  Cloud cloud;               ///< working subsample of `full`
  PointAttributes attrs;     ///< attributes of the working cloud
  NormalizeTransform transform;
  std::vector<int> working;
  SpectralEmbedding consistency;
  SpectralEmbedding smoothness;
  FeatureBundle bundle;
  std::vector<std::string> warnings;
};

/// Attributes for the cloud: estimated when `given` is empty.
PointAttributes prepare_attributes(const Cloud& cloud, const std::optional<PointAttributes>& given,
                                   const PipelineConfig& cfg, const NormalizeTransform& transform);

/// Normalization, normals, subsampling, matrices, embeddings and the bundle.
FeatureStage build_features(const Cloud& cloud, const std::optional<PointAttributes>& attrs,
                            const PipelineConfig& cfg);

/// Bundle of the semantic descriptor and every spectral column, with
/// entropy bandwidths scaled by each feature's spread.
FeatureBundle make_bundle(const Eigen::MatrixXd& descriptors, const SpectralEmbedding& consistency,
                          const SpectralEmbedding& smoothness, const HyperParams& hp);

/// RMS distance of the rows of F from their mean, divided by sqrt(m).
double feature_spread(const Eigen::MatrixXd& F);

/// Majority vote of per-point argmax types; ties go to the lower code.
PrimitiveType vote_type(const PointAttributes& attrs, const std::vector<int>& members);

/// Full pipeline. `attrs`, when given, must be in the cloud's coordinates.
Segmentation segment(const Cloud& cloud, const std::optional<PointAttributes>& attrs, const PipelineConfig& cfg,
                     PipelineTrace* trace = nullptr);

/// Greedy merge of adjacent same-type segments, most connected pair first.
/// `labels` must be contiguous from 0; returns canonical labels.
std::vector<int> merge_adjacent_segments(const Cloud& cloud, const PointAttributes& attrs, std::vector<int> labels,
                                         const NeighborGraph& graph, const FitOptions& fit);

/// Segment ids for all points by 1-nearest neighbor in the working set.
std::vector<int> propagate_labels(const Points<double>& all, const std::vector<int>& working,
                                  const std::vector<int>& working_labels);

}  // namespace primseg
