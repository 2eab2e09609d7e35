#pragma once

#include "primseg/geometry.hpp"
#include "primseg/segmentation.hpp"
#include "primseg/synth.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace primseg {

/// Minimum-cost perfect assignment of rows to columns of a rectangular cost
/// matrix with rows <= cols. Returns the column of each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// IoU between every GT segment (rows) and predicted segment (columns).
Eigen::MatrixXd iou_matrix(const std::vector<int>& pred, int pred_count, const std::vector<int>& gt, int gt_count);

/// Predicted segment matched to each GT segment (-1 when unmatched), chosen
/// to maximize the total IoU.
std::vector<int> match_segments(const Segmentation& pred, const Segmentation& gt);

double seg_iou(const Segmentation& pred, const Segmentation& gt, const std::vector<int>& assignment);
double seg_iou(const Segmentation& pred, const Segmentation& gt);

double type_iou(const Segmentation& pred, const Segmentation& gt, const std::vector<int>& assignment);

struct ResErrorResult {
  double total = 0;                  ///< Σ_k mean distance, over matched pairs
  std::vector<double> per_segment;   ///< NaN for skipped GT segments
  int skipped = 0;                   ///< unmatched or without a fitted primitive
};

/// For every matched pair, mean distance from `samples` GT surface points to
/// the predicted primitive; summed over pairs.
ResErrorResult res_error(const Segmentation& pred, const std::vector<Points<double>>& gt_samples,
                         const std::vector<int>& assignment, ConeFormula cone = ConeFormula::Perpendicular);

/// M noise-free surface samples per primitive of the scene, seeded.
std::vector<Points<double>> sample_ground_truth(const SceneSpec& spec, int samples_per_patch, std::uint64_t seed);

/// Fraction of points strictly closer than epsilon to some primitive.
double p_coverage(const Points<double>& points, const std::vector<Primitive>& primitives, double epsilon = 0.01,
                  ConeFormula cone = ConeFormula::Perpendicular);

struct SegmentMetric {
  int gt_id = 0;
  int pred_id = -1;
  double iou = 0;
  bool type_match = false;
  double res_error = 0;  ///< NaN when skipped
};

struct MetricsReport {
  double seg_iou = 0;
  double type_iou = 0;
  double res_error = 0;
  double p_coverage = 0;
  int res_error_skipped = 0;
  std::vector<SegmentMetric> segments;
};

struct EvalOptions {
  int samples_per_patch = 512;
  double epsilon = 0.01;
  std::uint64_t seed = 0;
  ConeFormula cone = ConeFormula::Perpendicular;
};

/// All four metrics. Without a scene spec the GT surface samples are the
/// cloud points of each GT segment.
MetricsReport evaluate(const Segmentation& pred, const Segmentation& gt, const Cloud& cloud,
                       const std::optional<SceneSpec>& scene, const EvalOptions& opts = {});

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_table(const MetricsReport& report);

}  // namespace primseg
