#include "primseg/fitting.hpp"

#include <numeric>

namespace primseg {

namespace {

struct Moments {
  Vec3d centroid;
  Eigen::Vector3d eigenvalues;  // ascending
  Eigen::Matrix3d eigenvectors;
};

Moments moments(const Points<double>& pts) {
  const Eigen::RowVector3d c = pts.colwise().mean();
  const Points<double> d = pts.rowwise() - c;
  const Eigen::Matrix3d cov = d.transpose() * d / double(pts.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  return {c.transpose(), es.eigenvalues(), es.eigenvectors()};
}

GaussNewtonOptions gn_options(const FitOptions& o) {
  GaussNewtonOptions g;
  g.max_iter = o.max_iter;
  g.max_halvings = o.max_halvings;
  g.rel_tol = o.rel_tol;
  return g;
}

void orthonormal_basis(const Vec3d& a, Vec3d& b1, Vec3d& b2) {
  b1 = any_orthogonal(a);
  b2 = a.cross(b1).normalized();
}

bool lexicographically_positive(const Vec3d& n) {
  for (int c = 0; c < 3; ++c) {
    if (n(c) > 1e-12) return true;
    if (n(c) < -1e-12) return false;
  }
  return true;
}

void require_count(const Points<double>& pts, int minimum, const char* what) {
  if (pts.rows() < minimum)
    throw Error(std::string(what) + " fit needs at least " + std::to_string(minimum) + " points", "fit");
}

}  // namespace

Points<double> gather(const Points<double>& src, const std::vector<int>& indices) {
  Points<double> out(static_cast<Eigen::Index>(indices.size()), 3);
  for (size_t k = 0; k < indices.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = src.row(indices[k]);
  return out;
}

void score_fit(FitResult& fit, const Points<double>& pts, double inlier_threshold) {
  const Primitive prim = fit.primitive();
  double sum = 0;
  int inliers = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const double d = distance(pts.row(i).transpose(), prim);
    sum += d * d;
    if (d < inlier_threshold) ++inliers;
  }
  fit.rms_residual = std::sqrt(sum / double(std::max<Eigen::Index>(pts.rows(), 1)));
  fit.inlier_count = inliers;
}

int min_fit_points(PrimitiveType t) {
  switch (t) {
    case PrimitiveType::Plane: return 3;
    case PrimitiveType::Sphere: return 4;
    case PrimitiveType::Cylinder:
    case PrimitiveType::Cone: return 6;
    default: return 16;
  }
}

// ---------------------------------------------------------------------------

FitResult fit_plane(const Points<double>& pts, const Points<double>* normals, const FitOptions& opts) {
  require_count(pts, 3, "plane");
  const Moments m = moments(pts);
  if (!(m.eigenvalues(2) > 0) || m.eigenvalues(1) <= 1e-12 * m.eigenvalues(2)) throw Error("rank deficient", "fit");
  Vec3d n = m.eigenvectors.col(0);
  if (normals && normals->rows() == pts.rows()) {
    if (n.dot(normals->colwise().sum().transpose()) < 0) n = -n;
  } else if (!lexicographically_positive(n)) {
    n = -n;
  }
  FitResult fit;
  fit.type = PrimitiveType::Plane;
  fit.params = plane_params(n, n.dot(m.centroid));
  score_fit(fit, pts, opts.inlier_threshold);
  return fit;
}

// ---------------------------------------------------------------------------

FitResult fit_sphere(const Points<double>& pts, const FitOptions& opts) {
  require_count(pts, 4, "sphere");
  const Moments m = moments(pts);
  if (!(m.eigenvalues(2) > 0) || m.eigenvalues(0) <= 1e-12 * m.eigenvalues(2)) throw Error("rank deficient", "fit");

  // |p|^2 = 2 o.p + c with c = r^2 - |o|^2, solved in centroid coordinates.
  const Eigen::Index n = pts.rows();
  const Points<double> q = pts.rowwise() - m.centroid.transpose();
  Eigen::MatrixXd A(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A.row(i) << 2 * q(i, 0), 2 * q(i, 1), 2 * q(i, 2), 1.0;
    b(i) = q.row(i).squaredNorm();
  }
  const auto qr = A.colPivHouseholderQr();
  if (qr.rank() < 4) throw Error("rank deficient", "fit");
  const Eigen::Vector4d x = qr.solve(b);
  Vec3d o = x.head<3>() + m.centroid;
  const double r2 = x(3) + x.head<3>().squaredNorm();
  if (!(r2 > 0)) throw Error("rank deficient", "fit");

  struct State {
    Vec3d o;
    double r;
  };
  const State init{o, std::sqrt(r2)};
  auto residuals = [&](const State& s) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = (pts.row(i).transpose() - s.o).norm() - s.r;
    return r;
  };
  auto retract = [](const State& s, const Eigen::VectorXd& d) { return State{s.o + d.head<3>(), s.r + d(3)}; };
  const auto gn = gauss_newton(init, 4, residuals, retract, gn_options(opts));

  FitResult fit;
  fit.type = PrimitiveType::Sphere;
  const State& s = gn.finite ? gn.state : init;
  fit.converged = gn.finite;
  if (!(s.r > 0) || s.r > opts.max_radius) throw Error("degenerate sphere radius", "fit");
  fit.params = sphere_params(s.o, s.r);
  score_fit(fit, pts, opts.inlier_threshold);
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

struct CylinderState {
  Vec3d a;
  Vec3d o;
  double r;
};

CylinderState refine_cylinder(const Points<double>& pts, const CylinderState& init, const FitOptions& opts,
                              bool& finite) {
  const Eigen::Index n = pts.rows();
  auto residuals = [&](const CylinderState& s) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3d v = pts.row(i).transpose() - s.o;
      r(i) = (v - s.a * s.a.dot(v)).norm() - s.r;
    }
    return r;
  };
  auto retract = [](const CylinderState& s, const Eigen::VectorXd& d) {
    Vec3d b1, b2;
    orthonormal_basis(s.a, b1, b2);
    CylinderState out;
    out.a = (s.a + d(0) * b1 + d(1) * b2).normalized();
    out.o = s.o + d(2) * b1 + d(3) * b2;
    out.r = s.r + d(4);
    return out;
  };
  const auto gn = gauss_newton(init, 5, residuals, retract, gn_options(opts));
  finite = gn.finite;
  return gn.finite ? gn.state : init;
}

}  // namespace

FitResult fit_cylinder(const Points<double>& pts, const Points<double>* normals, const FitOptions& opts) {
  if (!normals || normals->rows() != pts.rows()) throw Error("normals required", "fit");
  require_count(pts, 6, "cylinder");
  const Eigen::Matrix3d M = normals->transpose() * (*normals) / double(pts.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
  if (es.eigenvalues()(1) <= 1e-10 * es.eigenvalues()(2)) throw Error("degenerate normals", "fit");
  const Vec3d a = es.eigenvectors().col(0);

  // Kasa circle fit in the plane orthogonal to the axis.
  Vec3d b1, b2;
  orthonormal_basis(a, b1, b2);
  const Vec3d c = pts.colwise().mean().transpose();
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3d v = pts.row(i).transpose() - c;
    const double x = v.dot(b1), y = v.dot(b2);
    A.row(i) << 2 * x, 2 * y, 1.0;
    rhs(i) = x * x + y * y;
  }
  const auto qr = A.colPivHouseholderQr();
  if (qr.rank() < 3) throw Error("degenerate circle", "fit");
  const Eigen::Vector3d x = qr.solve(rhs);
  const double r2 = x(2) + x(0) * x(0) + x(1) * x(1);
  if (!(r2 > 0)) throw Error("degenerate circle", "fit");
  const CylinderState init{a, c + x(0) * b1 + x(1) * b2, std::sqrt(r2)};

  bool finite = true;
  CylinderState s = refine_cylinder(pts, init, opts, finite);
  if (!(s.r > 0) || s.r > opts.max_radius) throw Error("degenerate cylinder radius", "fit");
  s.o += s.a * s.a.dot(c - s.o);

  FitResult fit;
  fit.type = PrimitiveType::Cylinder;
  fit.converged = finite;
  fit.params = cylinder_params(s.a, s.o, s.r);
  score_fit(fit, pts, opts.inlier_threshold);
  return fit;
}

// ---------------------------------------------------------------------------

FitResult fit_cone(const Points<double>& pts, const Points<double>* normals, const FitOptions& opts) {
  if (!normals || normals->rows() != pts.rows()) throw Error("normals required", "fit");
  require_count(pts, 6, "cone");
  const Eigen::Index n = pts.rows();

  // Least-squares intersection of the tangent planes n_i . (x - p_i) = 0.
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3d nn = normals->row(i).transpose();
    const Eigen::Matrix3d P = nn * nn.transpose();
    M += P;
    b += P * pts.row(i).transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
  if (es.eigenvalues()(0) <= 1e-8 * es.eigenvalues()(2)) throw Error("apex at infinity", "fit");
  const Vec3d apex = es.eigenvectors() *
                     (es.eigenvectors().transpose() * b).cwiseQuotient(es.eigenvalues());
  const Moments m = moments(pts);
  const double extent = std::sqrt(m.eigenvalues.sum());
  if (!apex.allFinite() || (apex - m.centroid).norm() > 1e3 * std::max(extent, 1e-12))
    throw Error("apex at infinity", "fit");

  Vec3d axis = Vec3d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3d v = pts.row(i).transpose() - apex;
    const double len = v.norm();
    if (len > 0) axis += v / len;
  }
  if (!(axis.norm() > 0)) throw Error("apex at infinity", "fit");
  axis.normalize();
  double theta = 0;
  int counted = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3d v = pts.row(i).transpose() - apex;
    const double len = v.norm();
    if (len > 0) {
      theta += std::acos(std::clamp(axis.dot(v) / len, -1.0, 1.0));
      ++counted;
    }
  }
  theta /= std::max(counted, 1);
  constexpr double kMinAngle = 1e-6, kMaxAngle = M_PI / 2 - 1e-6;
  theta = std::clamp(theta, kMinAngle, kMaxAngle);

  struct State {
    Vec3d o;
    Vec3d a;
    double theta;
  };
  auto residuals = [&](const State& s) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3d v = pts.row(i).transpose() - s.o;
      const double len = v.norm();
      if (len == 0) {
        r(i) = 0;
        continue;
      }
      const double phi = std::acos(std::clamp(s.a.dot(v) / len, -1.0, 1.0));
      r(i) = len * std::sin(phi - s.theta);
    }
    return r;
  };
  auto retract = [&](const State& s, const Eigen::VectorXd& d) {
    Vec3d b1, b2;
    orthonormal_basis(s.a, b1, b2);
    return State{s.o + d.head<3>(), (s.a + d(3) * b1 + d(4) * b2).normalized(),
                 std::clamp(s.theta + d(5), kMinAngle, kMaxAngle)};
  };
  const State init{apex, axis, theta};
  const auto gn = gauss_newton(init, 6, residuals, retract, gn_options(opts));
  const State& s = gn.finite ? gn.state : init;

  FitResult fit;
  fit.type = PrimitiveType::Cone;
  fit.converged = gn.finite;
  fit.params = cone_params(s.o, s.a, s.theta);
  score_fit(fit, pts, opts.inlier_threshold);
  return fit;
}

// ---------------------------------------------------------------------------

FitResult fit_bspline(const Points<double>& pts, bool closed, const Points<double>* normals,
                      const BSplineFitOptions& bopts, const FitOptions& opts) {
  require_count(pts, min_fit_points(PrimitiveType::BSplineOpen), "B-spline");
  const int g = std::max(bopts.grid, 4);
  const Eigen::Index n = pts.rows();
  const Moments m = moments(pts);

  std::vector<double> us(static_cast<size_t>(n)), vs(static_cast<size_t>(n));
  Points<double> base(static_cast<Eigen::Index>(g) * g, 3);

  if (!closed) {
    const Vec3d e1 = m.eigenvectors.col(2), e2 = m.eigenvectors.col(1);
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3d d = pts.row(i).transpose() - m.centroid;
      const double x = d.dot(e1), y = d.dot(e2);
      us[static_cast<size_t>(i)] = x;
      vs[static_cast<size_t>(i)] = y;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    const double wx = std::max(x1 - x0, 1e-12), wy = std::max(y1 - y0, 1e-12);
    for (Eigen::Index i = 0; i < n; ++i) {
      us[static_cast<size_t>(i)] = (us[static_cast<size_t>(i)] - x0) / wx;
      vs[static_cast<size_t>(i)] = (vs[static_cast<size_t>(i)] - y0) / wy;
    }
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < g; ++j)
        base.row(i * g + j) = (m.centroid + e1 * (x0 + wx * i / (g - 1)) + e2 * (y0 + wy * j / (g - 1))).transpose();
  } else {
    Vec3d axis = m.eigenvectors.col(2);
    if (normals && normals->rows() == n) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(normals->transpose() * (*normals));
      axis = es.eigenvectors().col(0);
    }
    Vec3d b1, b2;
    orthonormal_basis(axis, b1, b2);
    double h0 = 1e300, h1 = -1e300, radius = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3d d = pts.row(i).transpose() - m.centroid;
      const double h = d.dot(axis);
      const double ang = std::atan2(d.dot(b2), d.dot(b1));
      us[static_cast<size_t>(i)] = (ang + M_PI) / (2 * M_PI);
      vs[static_cast<size_t>(i)] = h;
      radius += (d - axis * h).norm();
      h0 = std::min(h0, h), h1 = std::max(h1, h);
    }
    radius /= double(n);
    const double wh = std::max(h1 - h0, 1e-12);
    for (Eigen::Index i = 0; i < n; ++i) vs[static_cast<size_t>(i)] = (vs[static_cast<size_t>(i)] - h0) / wh;
    for (int i = 0; i < g; ++i) {
      const double ang = 2 * M_PI * (i - 1.5) / g - M_PI;
      for (int j = 0; j < g; ++j)
        base.row(i * g + j) = (m.centroid + radius * (std::cos(ang) * b1 + std::sin(ang) * b2) +
                               axis * (h0 + wh * j / (g - 1)))
                                  .transpose();
    }
  }

  // Normal equations (N^T N + mu I) C = N^T P + mu C0.
  const int G = g * g;
  Eigen::MatrixXd NtN = Eigen::MatrixXd::Zero(G, G);
  Eigen::MatrixXd NtP = Eigen::MatrixXd::Zero(G, 3);
  std::array<double, 4> nu{}, dnu{}, nv{}, dnv{};
  std::array<int, 16> idx{};
  std::array<double, 16> w{};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int fu = Patch::basis(us[static_cast<size_t>(i)], g, closed, nu, dnu);
    const int fv = Patch::basis(vs[static_cast<size_t>(i)], g, false, nv, dnv);
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 4; ++c) {
        const int row = closed ? (fu + a) % g : fu + a;
        idx[static_cast<size_t>(a * 4 + c)] = row * g + fv + c;
        w[static_cast<size_t>(a * 4 + c)] = nu[static_cast<size_t>(a)] * nv[static_cast<size_t>(c)];
      }
    for (size_t a = 0; a < 16; ++a) {
      NtP.row(idx[a]) += w[a] * pts.row(i);
      for (size_t c = 0; c < 16; ++c) NtN(idx[a], idx[c]) += w[a] * w[c];
    }
  }
  NtN.diagonal().array() += bopts.damping;
  NtP += bopts.damping * Eigen::MatrixXd(base);
  const Eigen::MatrixXd C = NtN.ldlt().solve(NtP);
  if (!C.allFinite()) throw Error("B-spline fit failed", "fit");

  FitResult fit;
  fit.type = closed ? PrimitiveType::BSplineClosed : PrimitiveType::BSplineOpen;
  fit.patch.emplace(g, g, Points<double>(C), closed);
  score_fit(fit, pts, opts.inlier_threshold);
  return fit;
}

// ---------------------------------------------------------------------------

FitResult refit_segment_primitive(const Cloud& cloud, const std::vector<int>& indices, PrimitiveType type,
                                  const FitOptions& opts) {
  if (static_cast<int>(indices.size()) < min_fit_points(type))
    throw Error("segment too small for " + std::string(type_name(type)) + " fit", "fit");
  const Points<double> pts = gather(cloud.positions(), indices);
  std::optional<Points<double>> normals;
  if (cloud.has_normals()) normals = gather(cloud.normals(), indices);
  const Points<double>* np = normals ? &*normals : nullptr;
  switch (type) {
    case PrimitiveType::Plane: return fit_plane(pts, np, opts);
    case PrimitiveType::Sphere: return fit_sphere(pts, opts);
    case PrimitiveType::Cylinder: return fit_cylinder(pts, np, opts);
    case PrimitiveType::Cone: return fit_cone(pts, np, opts);
    case PrimitiveType::BSplineOpen: return fit_bspline(pts, false, np, {}, opts);
    case PrimitiveType::BSplineClosed: return fit_bspline(pts, true, np, {}, opts);
  }
  throw Error("unreachable");
}

}  // namespace primseg
