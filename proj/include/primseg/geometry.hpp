#pragma once

#include "primseg/bspline.hpp"
#include "primseg/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

namespace primseg {

// ---------------------------------------------------------------------------
// Normalization

/// out = scale * (in + translation)
struct NormalizeTransform {
  Vec3d translation = Vec3d::Zero();
  double scale = 1.0;

  Vec3d apply(const Vec3d& p) const { return scale * (p + translation); }
  Vec3d invert(const Vec3d& q) const { return q / scale - translation; }
  /// The transform that undoes this one.
  NormalizeTransform inverse() const { return {-scale * translation, 1.0 / scale}; }
};

struct NormalizedCloud {
  Cloud cloud;
  NormalizeTransform transform;
};

/// Diameter estimate: exact farthest pair up to 2048 points, farthest pair of
/// a strided 2048-point subsample beyond that.
double diameter_estimate(const Points<double>& positions);

/// Centers the cloud at its mean and scales it to unit diameter.
NormalizedCloud normalize_cloud(const Cloud& cloud);

Cloud apply_inverse(const Cloud& cloud, const NormalizeTransform& t);

/// Parameters of an analytic primitive after x -> t.apply(x).
Params transform_params(PrimitiveType type, const Params& s, const NormalizeTransform& t);
Patch transform_patch(const Patch& patch, const NormalizeTransform& t);

// ---------------------------------------------------------------------------
// Neighborhoods

/// Exact k-d tree over a fixed point set. Query results are ordered by
/// (distance, index), so equal distances resolve to the lower index.
class KdTree {
 public:
  explicit KdTree(const Points<double>& points);
  ~KdTree();
  KdTree(KdTree&&) noexcept;
  KdTree& operator=(KdTree&&) noexcept;

  struct Hit {
    int index;
    double sq_distance;
  };

  /// k nearest points to q, skipping `exclude` (pass -1 to keep all).
  std::vector<Hit> knn(const Vec3d& q, int k, int exclude = -1) const;
  Hit nearest(const Vec3d& q) const { return knn(q, 1).front(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// k-nearest-neighbor graph; each list holds min(k, n-1) entries.
NeighborGraph knn_graph(const Cloud& cloud, int k);

/// Deterministic farthest-point subsample starting at index 0.
std::vector<int> farthest_point_sample(const Points<double>& positions, int count);

// ---------------------------------------------------------------------------
// Point-to-primitive distance

enum class ConeFormula {
  Perpendicular,  ///< |‖p−o‖ sin(φ−θ)|, zero on the cone surface
  Cosine,         ///< ‖p−o‖ cos(φ−θ)
};

/// Closed-form distance from p to an analytic primitive.
template <typename Scalar>
Scalar distance_point_primitive(const Vec3<Scalar>& p, PrimitiveType type, const ParamVector<Scalar>& s,
                                ConeFormula cone = ConeFormula::Perpendicular) {
  using std::abs;
  using std::acos;
  using std::cos;
  using std::sin;
  switch (type) {
    case PrimitiveType::Plane:
      return abs(p.dot(s.template segment<3>(slot::plane_n)) - s(slot::plane_d));
    case PrimitiveType::Sphere:
      return abs((p - s.template segment<3>(slot::sphere_o)).norm() - s(slot::sphere_r));
    case PrimitiveType::Cylinder: {
      const Vec3<Scalar> a = s.template segment<3>(slot::cyl_a);
      const Vec3<Scalar> v = p - s.template segment<3>(slot::cyl_o);
      return abs((v - a * a.dot(v)).norm() - s(slot::cyl_r));
    }
    case PrimitiveType::Cone: {
      const Vec3<Scalar> v = p - s.template segment<3>(slot::cone_o);
      const Scalar len = v.norm();
      if (len == Scalar(0)) return Scalar(0);
      const Scalar c = std::clamp(s.template segment<3>(slot::cone_a).dot(v) / len, Scalar(-1), Scalar(1));
      const Scalar phi = acos(c) - s(slot::cone_theta);
      if (cone == ConeFormula::Cosine) return len * cos(phi);
      return abs(len * sin(phi));
    }
    default:
      throw Error("B-spline distance requires a control patch");
  }
}

/// A realized primitive: analytic parameters or a B-spline patch.
struct Primitive {
  PrimitiveType type = PrimitiveType::Plane;
  Params params = Params::Zero();
  std::optional<Patch> patch;
};

double distance(const Vec3d& p, const Primitive& prim, ConeFormula cone = ConeFormula::Perpendicular);

/// Rigid motion x -> R x + t applied to the parameters of an analytic type.
template <typename Scalar>
ParamVector<Scalar> transform_params(PrimitiveType type, const ParamVector<Scalar>& s,
                                     const Eigen::Matrix<Scalar, 3, 3>& R, const Vec3<Scalar>& t) {
  ParamVector<Scalar> out = s;
  switch (type) {
    case PrimitiveType::Plane: {
      const Vec3<Scalar> n = R * s.template segment<3>(slot::plane_n);
      out.template segment<3>(slot::plane_n) = n;
      out(slot::plane_d) = s(slot::plane_d) + n.dot(t);
      break;
    }
    case PrimitiveType::Sphere:
      out.template segment<3>(slot::sphere_o) = R * s.template segment<3>(slot::sphere_o) + t;
      break;
    case PrimitiveType::Cylinder:
      out.template segment<3>(slot::cyl_a) = R * s.template segment<3>(slot::cyl_a);
      out.template segment<3>(slot::cyl_o) = R * s.template segment<3>(slot::cyl_o) + t;
      break;
    case PrimitiveType::Cone:
      out.template segment<3>(slot::cone_o) = R * s.template segment<3>(slot::cone_o) + t;
      out.template segment<3>(slot::cone_a) = R * s.template segment<3>(slot::cone_a);
      break;
    default:
      break;
  }
  return out;
}

/// Any unit vector orthogonal to a (a must be nonzero).
template <typename Scalar>
Vec3<Scalar> any_orthogonal(const Vec3<Scalar>& a) {
  const Vec3<Scalar> ref = std::abs(a.x()) < Scalar(0.9) * a.norm() ? Vec3<Scalar>::UnitX() : Vec3<Scalar>::UnitY();
  return a.cross(ref).normalized();
}

}  // namespace primseg
