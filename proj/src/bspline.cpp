#include "primseg/bspline.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace primseg {

namespace {

double wrap_or_clamp(double t, bool closed) {
  if (closed) return t - std::floor(t);
  return std::clamp(t, 0.0, 1.0);
}

ClosestPoint refine_closest(const Patch& patch, const Vec3d& p, double u, double v, bool closed, int max_iter) {
  auto s = patch.eval_with_derivatives(u, v);
  double f = (s.point - p).squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::Matrix<double, 3, 2> J;
    J.col(0) = s.du;
    J.col(1) = s.dv;
    const Eigen::Vector3d r = s.point - p;
    Eigen::Matrix2d JtJ = J.transpose() * J;
    JtJ.diagonal().array() += 1e-14 * (JtJ.trace() + 1e-300);
    const Eigen::Vector2d grad = J.transpose() * r;
    Eigen::Vector2d step = -JtJ.ldlt().solve(grad);
    // Coordinates on a bound whose gradient points outward stay fixed.
    const bool fix_u = !closed && ((u <= 0 && grad(0) > 0) || (u >= 1 && grad(0) < 0));
    const bool fix_v = (v <= 0 && grad(1) > 0) || (v >= 1 && grad(1) < 0);
    if (fix_u && fix_v) break;
    if (fix_u) step << 0, -grad(1) / JtJ(1, 1);
    if (fix_v) step << -grad(0) / JtJ(0, 0), 0;
    if (!step.allFinite()) break;

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 20; ++h, t *= 0.5) {
      const double un = wrap_or_clamp(u + t * step(0), closed);
      const double vn = wrap_or_clamp(v + t * step(1), false);
      auto sn = patch.eval_with_derivatives(un, vn);
      const double fn = (sn.point - p).squaredNorm();
      if (fn < f) {
        u = un;
        v = vn;
        s = sn;
        const double rel = (f - fn) / std::max(f, 1e-300);
        f = fn;
        accepted = true;
        if (rel < 1e-12) it = max_iter;
        break;
      }
    }
    if (!accepted) break;
  }

  return {std::sqrt(f), u, v, true};
}

}  // namespace

ClosestPoint bspline_closest_point(const Patch& patch, const Vec3d& p, const ClosestPointOptions& opts) {
  const int g = std::max(opts.grid, 2);
  const bool closed = patch.closed_u();

  std::vector<ClosestPoint> grid;
  grid.reserve(static_cast<size_t>(g) * static_cast<size_t>(g));
  for (int a = 0; a < g; ++a) {
    const double u = closed ? double(a) / g : double(a) / (g - 1);
    for (int b = 0; b < g; ++b) {
      const double v = double(b) / (g - 1);
      grid.push_back({(patch.eval(u, v) - p).norm(), u, v, false});
    }
  }
  const size_t starts = std::min<size_t>(static_cast<size_t>(std::max(opts.starts, 1)), grid.size());
  std::partial_sort(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(starts), grid.end(),
                    [](const ClosestPoint& x, const ClosestPoint& y) { return x.distance < y.distance; });

  ClosestPoint best = grid.front();
  for (size_t k = 0; k < starts; ++k) {
    const ClosestPoint r = refine_closest(patch, p, grid[k].u, grid[k].v, closed, opts.max_iter);
    if (r.distance < best.distance || (r.distance == best.distance && !best.refined)) best = r;
  }
  return best;
}

Patch planar_patch(int rows, int cols, double x0, double x1, double y0, double y1, double z) {
  Points<double> c(static_cast<Eigen::Index>(rows) * cols, 3);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      c.row(static_cast<Eigen::Index>(i) * cols + j) << x0 + (x1 - x0) * i / (rows - 1), y0 + (y1 - y0) * j / (cols - 1), z;
  return Patch(rows, cols, std::move(c), false);
}

}  // namespace primseg
