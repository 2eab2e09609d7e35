#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace primseg {

/// Error raised by every library stage. `stage()` names the pipeline step
/// that failed so front ends can tag diagnostics.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string stage = {})
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class PrimitiveType : int {
  Plane = 0,
  Sphere = 1,
  Cylinder = 2,
  Cone = 3,
  BSplineOpen = 4,
  BSplineClosed = 5,
};

inline constexpr int kNumTypes = 6;
inline constexpr int kNumAnalyticTypes = 4;
inline constexpr int kParamDim = 22;

constexpr int type_code(PrimitiveType t) { return static_cast<int>(t); }

inline PrimitiveType type_from_code(int code) {
  if (code < 0 || code >= kNumTypes) throw Error("invalid primitive type code " + std::to_string(code));
  return static_cast<PrimitiveType>(code);
}

constexpr bool is_analytic(PrimitiveType t) { return type_code(t) < kNumAnalyticTypes; }

inline std::string_view type_name(PrimitiveType t) {
  static constexpr std::array<std::string_view, kNumTypes> names{
      "plane", "sphere", "cylinder", "cone", "bspline_open", "bspline_closed"};
  return names[static_cast<size_t>(type_code(t))];
}

inline PrimitiveType type_from_name(std::string_view name) {
  for (int c = 0; c < kNumTypes; ++c)
    if (type_name(static_cast<PrimitiveType>(c)) == name) return static_cast<PrimitiveType>(c);
  throw Error("unknown primitive type '" + std::string(name) + "'");
}

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Packed shape parameters of the four analytic primitives.
///
/// Slot layout:
///   plane    n(0..2) d(3)
///   sphere   o(4..6) r(7)
///   cylinder a(8..10) o(11..13) r(14)
///   cone     apex(15..17) axis(18..20) half-angle(21)
template <typename Scalar>
using ParamVector = Eigen::Matrix<Scalar, kParamDim, 1>;

namespace slot {
inline constexpr int plane_n = 0;
inline constexpr int plane_d = 3;
inline constexpr int sphere_o = 4;
inline constexpr int sphere_r = 7;
inline constexpr int cyl_a = 8;
inline constexpr int cyl_o = 11;
inline constexpr int cyl_r = 14;
inline constexpr int cone_o = 15;
inline constexpr int cone_a = 18;
inline constexpr int cone_theta = 21;

/// First slot and width of the block owned by an analytic type.
constexpr std::pair<int, int> block(PrimitiveType t) {
  switch (t) {
    case PrimitiveType::Plane: return {0, 4};
    case PrimitiveType::Sphere: return {4, 4};
    case PrimitiveType::Cylinder: return {8, 7};
    case PrimitiveType::Cone: return {15, 7};
    default: return {0, 0};
  }
}
}  // namespace slot

template <typename Scalar>
ParamVector<Scalar> plane_params(const Vec3<Scalar>& n, Scalar d) {
  ParamVector<Scalar> s = ParamVector<Scalar>::Zero();
  s.template segment<3>(slot::plane_n) = n;
  s(slot::plane_d) = d;
  return s;
}

template <typename Scalar>
ParamVector<Scalar> sphere_params(const Vec3<Scalar>& o, Scalar r) {
  ParamVector<Scalar> s = ParamVector<Scalar>::Zero();
  s.template segment<3>(slot::sphere_o) = o;
  s(slot::sphere_r) = r;
  return s;
}

template <typename Scalar>
ParamVector<Scalar> cylinder_params(const Vec3<Scalar>& a, const Vec3<Scalar>& o, Scalar r) {
  ParamVector<Scalar> s = ParamVector<Scalar>::Zero();
  s.template segment<3>(slot::cyl_a) = a;
  s.template segment<3>(slot::cyl_o) = o;
  s(slot::cyl_r) = r;
  return s;
}

template <typename Scalar>
ParamVector<Scalar> cone_params(const Vec3<Scalar>& apex, const Vec3<Scalar>& axis, Scalar theta) {
  ParamVector<Scalar> s = ParamVector<Scalar>::Zero();
  s.template segment<3>(slot::cone_o) = apex;
  s.template segment<3>(slot::cone_a) = axis;
  s(slot::cone_theta) = theta;
  return s;
}

/// Checks the active-block invariants (unit directions, positive radii,
/// half-angle in (0, pi/2)).
template <typename Scalar>
bool params_valid(PrimitiveType t, const ParamVector<Scalar>& s, Scalar tol = Scalar(1e-6)) {
  auto unit = [&](int at) { return std::abs(s.template segment<3>(at).norm() - Scalar(1)) <= tol; };
  if (!s.allFinite()) return false;
  switch (t) {
    case PrimitiveType::Plane: return unit(slot::plane_n);
    case PrimitiveType::Sphere: return s(slot::sphere_r) > 0;
    case PrimitiveType::Cylinder: return unit(slot::cyl_a) && s(slot::cyl_r) > 0;
    case PrimitiveType::Cone:
      return unit(slot::cone_a) && s(slot::cone_theta) > 0 && s(slot::cone_theta) < Scalar(M_PI / 2);
    default: return true;
  }
}

/// Positions with optional unit normals. Immutable after construction.
template <typename Scalar>
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(Points<Scalar> positions, std::optional<Points<Scalar>> normals = std::nullopt)
      : positions_(std::move(positions)), normals_(std::move(normals)) {
    if (positions_.rows() == 0) throw Error("empty input");
    if (!positions_.allFinite()) throw Error("non-finite position");
    if (normals_) {
      if (normals_->rows() != positions_.rows()) throw Error("normal count does not match position count");
      for (Eigen::Index i = 0; i < normals_->rows(); ++i) {
        const Scalar len = normals_->row(i).norm();
        if (!std::isfinite(len) || len <= Scalar(0)) throw Error("zero or non-finite normal at point " + std::to_string(i));
        normals_->row(i) /= len;
      }
    }
  }

  Eigen::Index size() const { return positions_.rows(); }
  const Points<Scalar>& positions() const { return positions_; }
  Vec3<Scalar> position(Eigen::Index i) const { return positions_.row(i).transpose(); }
  bool has_normals() const { return normals_.has_value(); }
  const Points<Scalar>& normals() const {
    if (!normals_) throw Error("point cloud has no normals");
    return *normals_;
  }
  Vec3<Scalar> normal(Eigen::Index i) const { return normals().row(i).transpose(); }

  PointCloud subset(const std::vector<int>& indices) const {
    Points<Scalar> p(static_cast<Eigen::Index>(indices.size()), 3);
    std::optional<Points<Scalar>> nn;
    if (normals_) nn.emplace(static_cast<Eigen::Index>(indices.size()), 3);
    for (size_t k = 0; k < indices.size(); ++k) {
      p.row(static_cast<Eigen::Index>(k)) = positions_.row(indices[k]);
      if (nn) nn->row(static_cast<Eigen::Index>(k)) = normals_->row(indices[k]);
    }
    return PointCloud(std::move(p), std::move(nn));
  }

  PointCloud with_normals(Points<Scalar> normals) const { return PointCloud(positions_, std::move(normals)); }

 private:
  Points<Scalar> positions_;
  std::optional<Points<Scalar>> normals_;
};

using Cloud = PointCloud<double>;
using Params = ParamVector<double>;
using Vec3d = Vec3<double>;

/// k nearest neighbors per point, ascending by distance, ties by index.
struct NeighborGraph {
  int k = 0;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> indices;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> distances;

  Eigen::Index size() const { return indices.rows(); }
};

}  // namespace primseg
