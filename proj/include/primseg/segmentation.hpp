#pragma once

#include "primseg/geometry.hpp"
#include "primseg/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace primseg {

struct SegmentInfo {
  PrimitiveType type = PrimitiveType::Plane;
  std::optional<Params> params;  ///< analytic types with a successful fit
  std::optional<Patch> patch;    ///< B-spline types with a successful fit
  int size = 0;
  double rms_residual = 0;

  /// The fitted surface, when there is one.
  std::optional<Primitive> primitive() const;
};

/// Per-point labels with contiguous segment ids starting at 0.
struct Segmentation {
  std::vector<int> labels;
  std::vector<SegmentInfo> segments;

  Eigen::Index size() const { return static_cast<Eigen::Index>(labels.size()); }
  int count() const { return static_cast<int>(segments.size()); }
  std::vector<std::vector<int>> members() const;
  /// Throws when a label is out of range or a segment size disagrees.
  void validate() const;
};

/// Segments from a label array, relabeled canonically; only sizes are set.
Segmentation segmentation_from_labels(const std::vector<int>& labels);

/// Relabels so that segment ids appear in order of their first point.
std::vector<int> canonical_labels(const std::vector<int>& labels);

std::string segmentation_to_json(const Segmentation& seg);
Segmentation segmentation_from_json(const std::string& text);

}  // namespace primseg
