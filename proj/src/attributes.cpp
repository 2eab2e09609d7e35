#include "primseg/attributes.hpp"

#include "primseg/io.hpp"
#include "primseg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace primseg {

PrimitiveType PointAttributes::argmax_type(Eigen::Index i) const {
  Eigen::Index best = 0;
  type_dist.row(i).maxCoeff(&best);
  return static_cast<PrimitiveType>(best);
}

PointAttributes PointAttributes::zeros(Eigen::Index n, Eigen::Index m) {
  PointAttributes a;
  a.descriptors = Eigen::MatrixXd::Zero(n, m);
  a.type_dist = TypeMatrix::Constant(n, kNumTypes, 1.0 / kNumTypes);
  a.params = ParamMatrix::Zero(n, kParamDim);
  a.confidence = Eigen::VectorXd::Zero(n);
  return a;
}

void PointAttributes::validate() const {
  const Eigen::Index n = size();
  if (descriptors.rows() != n || params.rows() != n || confidence.size() != n)
    throw Error("attribute blocks disagree on point count", "attributes");
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((type_dist.row(i).array() < 0).any() || std::abs(type_dist.row(i).sum() - 1.0) > 1e-6)
      throw Error("type distribution of point " + std::to_string(i) + " is not normalized", "attributes");
  }
}

// ---------------------------------------------------------------------------

std::vector<int> neighborhood(const NeighborGraph& graph, Eigen::Index i, int k_fit) {
  const int k = std::min(k_fit, graph.k);
  std::vector<int> hood;
  hood.reserve(static_cast<size_t>(k) + 1);
  hood.push_back(static_cast<int>(i));
  for (int j = 0; j < k; ++j) hood.push_back(graph.indices(i, j));
  return hood;
}

Points<double> estimate_normals(const Cloud& cloud, const NeighborGraph& graph) {
  const Eigen::Index n = cloud.size();
  Points<double> normals(n, 3);
  const Eigen::RowVector3d center = cloud.positions().colwise().mean();
  parallel_for(n, [&](std::ptrdiff_t i) {
    const Points<double> pts = gather(cloud.positions(), neighborhood(graph, i, graph.k));
    const Eigen::RowVector3d c = pts.colwise().mean();
    const Points<double> d = pts.rowwise() - c;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(d.transpose() * d);
    Eigen::RowVector3d nn = es.eigenvectors().col(0).transpose();
    if (nn.dot(cloud.positions().row(i) - center) < 0) nn = -nn;
    normals.row(i) = nn;
  });
  return normals;
}

double LocalFits::residual(PrimitiveType t) const {
  const auto& f = fits[static_cast<size_t>(type_code(t))];
  return f ? f->rms_residual : std::numeric_limits<double>::infinity();
}

double LocalFits::penalized_residual(PrimitiveType t) const {
  constexpr std::array<int, kNumAnalyticTypes> free_params{3, 4, 5, 6};
  const double r = residual(t);
  if (!std::isfinite(r)) return r;
  const double k = std::max(neighborhood_size, 2);
  const double floor = 1e-6 * mean_neighbor_distance;
  return std::max(r, floor) * std::pow(k, free_params[static_cast<size_t>(type_code(t))] / (2.0 * k));
}

int LocalFits::best() const {
  int best = -1;
  double r = std::numeric_limits<double>::infinity();
  for (int t = 0; t < kNumAnalyticTypes; ++t) {
    const double rt = penalized_residual(static_cast<PrimitiveType>(t));
    if (rt < r) {
      r = rt;
      best = t;
    }
  }
  return best;
}

LocalFits fit_neighborhood(const Cloud& cloud, const std::vector<int>& hood, const EstimationOptions& opts) {
  LocalFits out;
  out.neighborhood_size = static_cast<int>(hood.size());
  const Points<double> pts = gather(cloud.positions(), hood);
  std::optional<Points<double>> normals;
  if (cloud.has_normals()) normals = gather(cloud.normals(), hood);
  const Points<double>* np = normals ? &*normals : nullptr;

  FitOptions fo = opts.fit;
  fo.inlier_threshold = opts.inlier_threshold;
  auto attempt = [&](PrimitiveType t, auto&& fn) {
    try {
      out.fits[static_cast<size_t>(type_code(t))] = fn();
    } catch (const Error&) {
    }
  };
  attempt(PrimitiveType::Plane, [&] { return fit_plane(pts, np, fo); });
  attempt(PrimitiveType::Sphere, [&] { return fit_sphere(pts, fo); });
  attempt(PrimitiveType::Cylinder, [&] { return fit_cylinder(pts, np, fo); });
  attempt(PrimitiveType::Cone, [&] { return fit_cone(pts, np, fo); });

  const Eigen::RowVector3d c = pts.colwise().mean();
  const Points<double> d = pts.rowwise() - c;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(d.transpose() * d / double(pts.rows()));
  out.eigenvalues = es.eigenvalues().reverse();

  const Eigen::RowVector3d p0 = pts.row(0);
  double md = 0, nv = 0;
  for (Eigen::Index j = 1; j < pts.rows(); ++j) {
    md += (pts.row(j) - p0).norm();
    if (normals) nv += 1.0 - std::abs(normals->row(0).dot(normals->row(j)));
  }
  const double cnt = double(std::max<Eigen::Index>(pts.rows() - 1, 1));
  out.mean_neighbor_distance = md / cnt;
  out.normal_variation = nv / cnt;
  return out;
}

Eigen::Matrix<double, kNumTypes, 1> softmin_types(const std::array<double, kNumAnalyticTypes>& residuals,
                                                  double tau) {
  Eigen::Matrix<double, kNumTypes, 1> p = Eigen::Matrix<double, kNumTypes, 1>::Zero();
  double lo = std::numeric_limits<double>::infinity();
  for (double r : residuals) lo = std::min(lo, r);
  if (!std::isfinite(lo)) {
    p.setConstant(1.0 / kNumTypes);
    return p;
  }
  for (int t = 0; t < kNumAnalyticTypes; ++t) {
    const double r = residuals[static_cast<size_t>(t)];
    p(t) = std::isfinite(r) ? std::exp(-(r - lo) / tau) : 0.0;
  }
  return p / p.sum();
}

Eigen::VectorXd descriptor_from_fits(const Cloud& cloud, Eigen::Index i, const LocalFits& fits) {
  constexpr double kFailedResidual = 1.0;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(kDescriptorDim);
  d.segment<3>(0) = cloud.position(i);
  if (cloud.has_normals()) d.segment<3>(3) = cloud.normal(i);
  const double l1 = fits.eigenvalues(0);
  if (l1 > 0) {
    d(6) = fits.eigenvalues(1) / l1;
    d(7) = fits.eigenvalues(2) / l1;
  }
  d(8) = fits.mean_neighbor_distance;
  for (int t = 0; t < kNumAnalyticTypes; ++t) d(9 + t) = std::min(fits.residual(static_cast<PrimitiveType>(t)), kFailedResidual);
  d(13) = fits.normal_variation;
  return d;
}

Eigen::VectorXd handcrafted_descriptor(const Cloud& cloud, const NeighborGraph& graph, Eigen::Index i,
                                       const EstimationOptions& opts) {
  if (i < 0 || i >= cloud.size()) throw Error("point index out of range", "descriptor");
  return descriptor_from_fits(cloud, i, fit_neighborhood(cloud, neighborhood(graph, i, opts.k_fit), opts));
}

namespace {

/// Fraction of the full turn covered by the neighborhood normals around the
/// direction they are most orthogonal to. A closed loop covers all of it.
double angular_coverage(const Cloud& cloud, const std::vector<int>& hood) {
  if (!cloud.has_normals()) return 0;
  const Points<double> nrm = gather(cloud.normals(), hood);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(nrm.transpose() * nrm);
  const Vec3d axis = es.eigenvectors().col(0);
  const Vec3d b1 = any_orthogonal(axis), b2 = axis.cross(b1);
  std::vector<double> ang;
  for (Eigen::Index j = 0; j < nrm.rows(); ++j) {
    const Vec3d nn = nrm.row(j).transpose();
    if ((nn - axis * axis.dot(nn)).norm() < 1e-9) continue;
    ang.push_back(std::atan2(nn.dot(b2), nn.dot(b1)));
  }
  if (ang.size() < 2) return 0;
  std::sort(ang.begin(), ang.end());
  double gap = ang.front() + 2 * M_PI - ang.back();
  for (size_t j = 1; j < ang.size(); ++j) gap = std::max(gap, ang[j] - ang[j - 1]);
  return 1.0 - gap / (2 * M_PI);
}

}  // namespace

PointAttributes estimate_point_attributes(const Cloud& cloud, const NeighborGraph& graph,
                                          const EstimationOptions& opts) {
  if (!cloud.has_normals()) throw Error("attribute estimation needs normals", "attributes");
  if (graph.size() != cloud.size()) throw Error("graph does not match cloud", "attributes");
  const Eigen::Index n = cloud.size();
  PointAttributes out = PointAttributes::zeros(n, kDescriptorDim);
  const int k_fit = static_cast<int>(std::min<Eigen::Index>(opts.k_fit, n - 1));

  parallel_for(n, [&](std::ptrdiff_t i) {
    const auto hood = neighborhood(graph, i, k_fit);
    const LocalFits fits = fit_neighborhood(cloud, hood, opts);
    out.descriptors.row(i) = descriptor_from_fits(cloud, i, fits).transpose();
    const int best = fits.best();
    if (best < 0) return;  // uniform distribution, zero confidence

    std::array<double, kNumAnalyticTypes> res{};
    for (int t = 0; t < kNumAnalyticTypes; ++t) res[static_cast<size_t>(t)] = fits.penalized_residual(static_cast<PrimitiveType>(t));
    Eigen::Matrix<double, kNumTypes, 1> dist = softmin_types(res, opts.tau);
    const FitResult& fit = *fits.fits[static_cast<size_t>(best)];
    if (fit.rms_residual > opts.bspline_threshold) {
      const double closed = angular_coverage(cloud, hood);
      dist.setZero();
      dist(type_code(PrimitiveType::BSplineOpen)) = 1.0 - closed;
      dist(type_code(PrimitiveType::BSplineClosed)) = closed;
    }
    out.type_dist.row(i) = dist.transpose();
    const auto [first, width] = slot::block(fit.type);
    out.params.row(i).segment(first, width) = fit.params.segment(first, width).transpose();
    out.confidence(i) = fit.converged ? double(fit.inlier_count) / double(hood.size()) : 0.0;
  });
  return out;
}

// ---------------------------------------------------------------------------

std::string format_attributes(const PointAttributes& attrs) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << attrs.size() << ' ' << attrs.descriptors.cols() << '\n';
  auto rows = [&](const auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
      out << '\n';
    }
  };
  rows(attrs.descriptors);
  rows(attrs.type_dist);
  rows(attrs.params);
  return out.str();
}

PointAttributes parse_attributes(const std::string& text, Eigen::Index expected_n) {
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  auto next_line = [&]() -> std::string {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    }
    throw Error("attribute file truncated after line " + std::to_string(lineno), "attributes");
  };
  Eigen::Index n = 0, m = 0;
  {
    std::istringstream h(next_line());
    if (!(h >> n >> m) || n <= 0 || m <= 0) throw Error("bad attribute header at line " + std::to_string(lineno), "attributes");
  }
  if (expected_n >= 0 && n != expected_n)
    throw Error("length mismatch: attribute file has " + std::to_string(n) + " rows, cloud has " +
                    std::to_string(expected_n) + " points (line 1)",
                "attributes");
  PointAttributes a = PointAttributes::zeros(n, m);
  a.confidence.setOnes();
  auto read_rows = [&](auto& mat, Eigen::Index cols, auto&& check) {
    for (Eigen::Index i = 0; i < n; ++i) {
      std::istringstream row(next_line());
      for (Eigen::Index j = 0; j < cols; ++j)
        if (!(row >> mat(i, j))) throw Error("expected " + std::to_string(cols) + " values at line " + std::to_string(lineno), "attributes");
      double extra;
      if (row >> extra) throw Error("too many values at line " + std::to_string(lineno), "attributes");
      check(i);
    }
  };
  read_rows(a.descriptors, m, [](Eigen::Index) {});
  read_rows(a.type_dist, kNumTypes, [&](Eigen::Index i) {
    if ((a.type_dist.row(i).array() < 0).any() || std::abs(a.type_dist.row(i).sum() - 1.0) > 1e-6)
      throw Error("type distribution not normalized at line " + std::to_string(lineno), "attributes");
  });
  read_rows(a.params, kParamDim, [&](Eigen::Index i) {
    if (!a.params.row(i).allFinite()) throw Error("non-finite parameter at line " + std::to_string(lineno), "attributes");
  });
  if (!a.descriptors.allFinite()) throw Error("non-finite descriptor value", "attributes");
  return a;
}

PointAttributes load_attributes(const std::filesystem::path& path, Eigen::Index expected_n) {
  return parse_attributes(io::read_text(path), expected_n);
}

}  // namespace primseg
