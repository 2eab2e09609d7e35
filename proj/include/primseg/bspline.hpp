#pragma once

#include "primseg/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

namespace primseg {

/// Bicubic tensor-product B-spline patch. Control point (i, j) sits at row
/// `i * cols + j`; i runs along u. Open directions use clamped uniform knots,
/// a closed u direction uses periodic uniform knots and wraps modulo 1.
template <typename Scalar>
class BSplinePatch {
 public:
  static constexpr int kDegree = 3;

  BSplinePatch() = default;
  BSplinePatch(int rows, int cols, Points<Scalar> control, bool closed_u)
      : rows_(rows), cols_(cols), control_(std::move(control)), closed_u_(closed_u) {
    if (rows < 4 || cols < 4) throw Error("B-spline control grid must be at least 4x4");
    if (control_.rows() != static_cast<Eigen::Index>(rows) * cols) throw Error("control grid size mismatch");
    if (!control_.allFinite()) throw Error("non-finite control point");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool closed_u() const { return closed_u_; }
  const Points<Scalar>& control() const { return control_; }
  Vec3<Scalar> control_point(int i, int j) const { return control_.row(static_cast<Eigen::Index>(i) * cols_ + j).transpose(); }

  struct Sample {
    Vec3<Scalar> point;
    Vec3<Scalar> du;
    Vec3<Scalar> dv;
  };

  Vec3<Scalar> eval(Scalar u, Scalar v) const { return eval_with_derivatives(u, v).point; }

  Sample eval_with_derivatives(Scalar u, Scalar v) const {
    std::array<Scalar, 4> nu{}, dnu{}, nv{}, dnv{};
    const int fu = basis(u, rows_, closed_u_, nu, dnu);
    const int fv = basis(v, cols_, false, nv, dnv);
    Sample s{Vec3<Scalar>::Zero(), Vec3<Scalar>::Zero(), Vec3<Scalar>::Zero()};
    for (int a = 0; a < 4; ++a) {
      const int i = closed_u_ ? (fu + a) % rows_ : fu + a;
      for (int b = 0; b < 4; ++b) {
        const Vec3<Scalar> c = control_point(i, fv + b);
        s.point += nu[a] * nv[b] * c;
        s.du += dnu[a] * nv[b] * c;
        s.dv += nu[a] * dnv[b] * c;
      }
    }
    return s;
  }

  /// Clamped uniform knot k of an open direction with `count` control points.
  static Scalar open_knot(int k, int count) {
    if (k <= kDegree) return Scalar(0);
    if (k >= count) return Scalar(1);
    return Scalar(k - kDegree) / Scalar(count - kDegree);
  }

  /// Nonzero cubic basis values and first derivatives at t. Returns the index
  /// of the first contributing control point (unwrapped for closed directions).
  static int basis(Scalar t, int count, bool closed, std::array<Scalar, 4>& n, std::array<Scalar, 4>& dn) {
    if (closed) {
      t = t - std::floor(t);
      const Scalar x = t * Scalar(count);
      int span = static_cast<int>(std::floor(x));
      if (span >= count) span = count - 1;
      const Scalar f = x - Scalar(span);
      const Scalar f2 = f * f, f3 = f2 * f, g = Scalar(1) - f;
      n = {g * g * g / 6, (3 * f3 - 6 * f2 + 4) / 6, (-3 * f3 + 3 * f2 + 3 * f + 1) / 6, f3 / 6};
      const Scalar c = Scalar(count);
      dn = {-g * g / 2 * c, (9 * f2 - 12 * f) / 6 * c, (-9 * f2 + 6 * f + 3) / 6 * c, f2 / 2 * c};
      return span;
    }
    t = std::clamp(t, Scalar(0), Scalar(1));
    const int intervals = count - kDegree;
    int span = kDegree + static_cast<int>(std::floor(t * Scalar(intervals)));
    if (span > count - 1) span = count - 1;

    // Cox-de Boor triangle; keep the degree-2 row for the derivative.
    std::array<Scalar, 4> left{}, right{}, row{};
    std::array<Scalar, 3> quad{};
    row[0] = Scalar(1);
    for (int j = 1; j <= kDegree; ++j) {
      left[j] = t - open_knot(span + 1 - j, count);
      right[j] = open_knot(span + j, count) - t;
      Scalar saved = 0;
      for (int r = 0; r < j; ++r) {
        const Scalar denom = right[r + 1] + left[j - r];
        const Scalar tmp = denom != Scalar(0) ? row[r] / denom : Scalar(0);
        row[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      row[j] = saved;
      if (j == kDegree - 1) std::copy_n(row.begin(), 3, quad.begin());
    }
    n = row;
    const int first = span - kDegree;
    for (int r = 0; r < 4; ++r) {
      const int i = first + r;
      Scalar d = 0;
      if (r >= 1) {
        const Scalar den = open_knot(i + kDegree, count) - open_knot(i, count);
        if (den != Scalar(0)) d += kDegree * quad[r - 1] / den;
      }
      if (r <= 2) {
        const Scalar den = open_knot(i + kDegree + 1, count) - open_knot(i + 1, count);
        if (den != Scalar(0)) d -= kDegree * quad[r] / den;
      }
      dn[r] = d;
    }
    return first;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  Points<Scalar> control_;
  bool closed_u_ = false;
};

using Patch = BSplinePatch<double>;

struct ClosestPointOptions {
  int grid = 16;
  /// Grid samples refined, best first.
  int starts = 4;
  int max_iter = 30;
};

struct ClosestPoint {
  double distance = 0;
  double u = 0;
  double v = 0;
  bool refined = false;
};

/// Approximate closest point: coarse parameter grid, then Gauss-Newton from
/// the best sample. Never worse than the coarse minimum.
ClosestPoint bspline_closest_point(const Patch& patch, const Vec3d& p, const ClosestPointOptions& opts = {});

inline double bspline_closest_distance(const Patch& patch, const Vec3d& p, const ClosestPointOptions& opts = {}) {
  return bspline_closest_point(patch, p, opts).distance;
}

/// Regular planar lattice spanning [x0,x1]x[y0,y1] at height z.
Patch planar_patch(int rows, int cols, double x0, double x1, double y0, double y1, double z = 0.0);

}  // namespace primseg
