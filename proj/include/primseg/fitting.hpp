#pragma once

#include "primseg/geometry.hpp"
#include "primseg/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace primseg {

struct FitResult {
  PrimitiveType type = PrimitiveType::Plane;
  Params params = Params::Zero();
  double rms_residual = 0;
  int inlier_count = 0;
  /// False when refinement produced a non-finite state and the initial
  /// estimate was returned instead.
  bool converged = true;
  std::optional<Patch> patch;

  Primitive primitive() const { return {type, params, patch}; }
};

struct FitOptions {
  double inlier_threshold = 0.01;
  int max_iter = 50;
  int max_halvings = 20;
  double rel_tol = 1e-8;
  /// Radii above this are treated as degenerate fits.
  double max_radius = 1e3;
};

/// Least-squares plane from the point covariance.
FitResult fit_plane(const Points<double>& pts, const Points<double>* normals = nullptr, const FitOptions& opts = {});

/// Algebraic sphere followed by geometric Gauss-Newton refinement.
FitResult fit_sphere(const Points<double>& pts, const FitOptions& opts = {});

/// Axis from the normal covariance, circle fit in the orthogonal plane,
/// then Gauss-Newton on (axis, center, radius).
FitResult fit_cylinder(const Points<double>& pts, const Points<double>* normals, const FitOptions& opts = {});

/// Apex from the tangent-plane intersection, then Gauss-Newton on
/// (apex, axis, half-angle) with the perpendicular cone residual.
FitResult fit_cone(const Points<double>& pts, const Points<double>* normals, const FitOptions& opts = {});

struct BSplineFitOptions {
  int grid = 20;
  double damping = 1e-6;
};

/// Least-squares bicubic patch fit. Open patches use a planar PCA
/// parameterization, closed patches a cylindrical one around `axis_hint`
/// (or the principal axis when absent). Damping pulls control points toward
/// the parameterization's base surface.
FitResult fit_bspline(const Points<double>& pts, bool closed, const Points<double>* normals = nullptr,
                      const BSplineFitOptions& bopts = {}, const FitOptions& opts = {});

/// Minimum point count accepted by each fitter.
int min_fit_points(PrimitiveType t);

/// Fits `type` on the subset of the cloud.
FitResult refit_segment_primitive(const Cloud& cloud, const std::vector<int>& indices, PrimitiveType type,
                                  const FitOptions& opts = {});

/// Residual statistics of an arbitrary primitive on a point set.
void score_fit(FitResult& fit, const Points<double>& pts, double inlier_threshold);

Points<double> gather(const Points<double>& src, const std::vector<int>& indices);

// ---------------------------------------------------------------------------

struct GaussNewtonOptions {
  int max_iter = 50;
  int max_halvings = 20;
  double rel_tol = 1e-8;
  double jacobian_step = 1e-7;
};

template <typename State>
struct GaussNewtonResult {
  State state;
  double cost = 0;  ///< sum of squared residuals
  int iterations = 0;
  bool finite = true;
  std::vector<double> history;  ///< accepted costs, starting with the initial one
};

/// Gauss-Newton with step-halving line search on a manifold-valued state.
/// `residuals(state)` returns the residual vector; `retract(state, delta)`
/// moves the state by a local-coordinate step of size `dim`. Accepted costs are
/// non-increasing. Jacobians are central differences in local coordinates.
template <typename State, typename ResidualFn, typename RetractFn>
GaussNewtonResult<State> gauss_newton(State x, int dim, ResidualFn&& residuals, RetractFn&& retract,
                                      const GaussNewtonOptions& opts = {}) {
  GaussNewtonResult<State> out{x, 0, 0, true, {}};
  Eigen::VectorXd r = residuals(x);
  if (!r.allFinite()) {
    out.finite = false;
    out.cost = std::numeric_limits<double>::infinity();
    return out;
  }
  double cost = r.squaredNorm();
  out.history.push_back(cost);
  Eigen::MatrixXd J(r.size(), dim);
  const double h = opts.jacobian_step;
  for (int it = 0; it < opts.max_iter; ++it) {
    out.iterations = it + 1;
    for (int j = 0; j < dim; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e(j) = h;
      const Eigen::VectorXd rp = residuals(retract(x, e));
      const Eigen::VectorXd rm = residuals(retract(x, -e));
      J.col(j) = (rp - rm) / (2 * h);
    }
    if (!J.allFinite()) break;
    const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
    if (!step.allFinite()) break;

    double t = 1.0;
    bool accepted = false;
    double new_cost = cost;
    for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
      State cand = retract(x, t * step);
      Eigen::VectorXd rc = residuals(cand);
      if (!rc.allFinite()) continue;
      const double c = rc.squaredNorm();
      if (c < cost) {
        x = std::move(cand);
        r = std::move(rc);
        new_cost = c;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double rel = (cost - new_cost) / std::max(cost, 1e-300);
    cost = new_cost;
    out.history.push_back(cost);
    if (rel < opts.rel_tol) break;
  }
  out.state = std::move(x);
  out.cost = cost;
  return out;
}

}  // namespace primseg
