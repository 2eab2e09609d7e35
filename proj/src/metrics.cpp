#include "primseg/metrics.hpp"

#include "json.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace primseg {

using nlohmann::json;

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows()), m = static_cast<int>(cost.cols());
  if (n > m) throw Error("assignment needs rows <= cols", "metrics");
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials u (rows), v (cols); p[j] is the row matched to column j,
  // 1-based with row 0 as the virtual start.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0), v(static_cast<size_t>(m) + 1, 0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<size_t>(j)] > 0) out[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return out;
}

Eigen::MatrixXd iou_matrix(const std::vector<int>& pred, int pred_count, const std::vector<int>& gt, int gt_count) {
  if (pred.size() != gt.size()) throw Error("prediction and ground truth differ in length", "metrics");
  Eigen::MatrixXd inter = Eigen::MatrixXd::Zero(gt_count, pred_count);
  Eigen::VectorXd gs = Eigen::VectorXd::Zero(gt_count), ps = Eigen::VectorXd::Zero(pred_count);
  for (size_t i = 0; i < gt.size(); ++i) {
    inter(gt[i], pred[i]) += 1;
    gs(gt[i]) += 1;
    ps(pred[i]) += 1;
  }
  Eigen::MatrixXd iou(gt_count, pred_count);
  for (int g = 0; g < gt_count; ++g)
    for (int q = 0; q < pred_count; ++q) {
      const double uni = gs(g) + ps(q) - inter(g, q);
      iou(g, q) = uni > 0 ? inter(g, q) / uni : 0.0;
    }
  return iou;
}

std::vector<int> match_segments(const Segmentation& pred, const Segmentation& gt) {
  if (pred.size() != gt.size()) throw Error("prediction and ground truth differ in length", "metrics");
  const int G = gt.count(), P = pred.count();
  const Eigen::MatrixXd iou = iou_matrix(pred.labels, P, gt.labels, G);
  // Dummy columns give GT segments the option of staying unmatched.
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(G, std::max(P, G));
  cost.leftCols(P) = -iou;
  const std::vector<int> cols = hungarian(cost);
  std::vector<int> out(static_cast<size_t>(G), -1);
  for (int g = 0; g < G; ++g) {
    const int c = cols[static_cast<size_t>(g)];
    if (c >= 0 && c < P && iou(g, c) > 0) out[static_cast<size_t>(g)] = c;
  }
  return out;
}

double seg_iou(const Segmentation& pred, const Segmentation& gt, const std::vector<int>& assignment) {
  if (gt.count() == 0) return 0.0;
  const Eigen::MatrixXd iou = iou_matrix(pred.labels, pred.count(), gt.labels, gt.count());
  double s = 0;
  for (int g = 0; g < gt.count(); ++g) {
    const int q = assignment[static_cast<size_t>(g)];
    if (q >= 0) s += iou(g, q);
  }
  return s / gt.count();
}

double seg_iou(const Segmentation& pred, const Segmentation& gt) { return seg_iou(pred, gt, match_segments(pred, gt)); }

double type_iou(const Segmentation& pred, const Segmentation& gt, const std::vector<int>& assignment) {
  if (gt.count() == 0) return 0.0;
  int hits = 0;
  for (int g = 0; g < gt.count(); ++g) {
    const int q = assignment[static_cast<size_t>(g)];
    if (q >= 0 && pred.segments[static_cast<size_t>(q)].type == gt.segments[static_cast<size_t>(g)].type) ++hits;
  }
  return double(hits) / gt.count();
}

ResErrorResult res_error(const Segmentation& pred, const std::vector<Points<double>>& gt_samples,
                         const std::vector<int>& assignment, ConeFormula cone) {
  ResErrorResult r;
  r.per_segment.assign(gt_samples.size(), std::numeric_limits<double>::quiet_NaN());
  for (size_t g = 0; g < gt_samples.size(); ++g) {
    const int q = assignment[g];
    const auto prim = q >= 0 ? pred.segments[static_cast<size_t>(q)].primitive() : std::nullopt;
    if (!prim || gt_samples[g].rows() == 0) {
      ++r.skipped;
      continue;
    }
    double s = 0;
    for (Eigen::Index i = 0; i < gt_samples[g].rows(); ++i) s += distance(gt_samples[g].row(i).transpose(), *prim, cone);
    r.per_segment[g] = s / double(gt_samples[g].rows());
    r.total += r.per_segment[g];
  }
  return r;
}

std::vector<Points<double>> sample_ground_truth(const SceneSpec& spec, int samples_per_patch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Points<double>> out;
  for (const auto& p : spec.primitives) out.push_back(sample_surface(p, samples_per_patch, rng).positions());
  return out;
}

double p_coverage(const Points<double>& points, const std::vector<Primitive>& primitives, double epsilon,
                  ConeFormula cone) {
  if (points.rows() == 0) return 0.0;
  Eigen::Index covered = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vec3d p = points.row(i).transpose();
    for (const auto& prim : primitives) {
      if (distance(p, prim, cone) < epsilon) {
        ++covered;
        break;
      }
    }
  }
  return double(covered) / double(points.rows());
}

MetricsReport evaluate(const Segmentation& pred, const Segmentation& gt, const Cloud& cloud,
                       const std::optional<SceneSpec>& scene, const EvalOptions& opts) {
  if (pred.size() != gt.size() || cloud.size() != gt.size())
    throw Error("point counts of prediction, ground truth and cloud differ", "metrics");
  MetricsReport rep;
  const auto assignment = match_segments(pred, gt);
  rep.seg_iou = seg_iou(pred, gt, assignment);
  rep.type_iou = type_iou(pred, gt, assignment);

  std::vector<Points<double>> samples;
  if (scene && static_cast<int>(scene->primitives.size()) == gt.count()) {
    samples = sample_ground_truth(*scene, opts.samples_per_patch, opts.seed);
  } else {
    const auto members = gt.members();
    for (const auto& m : members) {
      std::vector<int> pick;
      const size_t stride = std::max<size_t>(1, m.size() / static_cast<size_t>(opts.samples_per_patch));
      for (size_t i = 0; i < m.size() && pick.size() < static_cast<size_t>(opts.samples_per_patch); i += stride)
        pick.push_back(m[i]);
      samples.push_back(cloud.subset(pick).positions());
    }
  }
  const ResErrorResult res = res_error(pred, samples, assignment, opts.cone);
  rep.res_error = res.total;
  rep.res_error_skipped = res.skipped;

  std::vector<Primitive> prims;
  for (const auto& s : pred.segments)
    if (auto p = s.primitive()) prims.push_back(*p);
  rep.p_coverage = prims.empty() ? 0.0 : p_coverage(cloud.positions(), prims, opts.epsilon, opts.cone);

  const Eigen::MatrixXd iou = iou_matrix(pred.labels, pred.count(), gt.labels, gt.count());
  for (int g = 0; g < gt.count(); ++g) {
    SegmentMetric m;
    m.gt_id = g;
    m.pred_id = assignment[static_cast<size_t>(g)];
    if (m.pred_id >= 0) {
      m.iou = iou(g, m.pred_id);
      m.type_match = pred.segments[static_cast<size_t>(m.pred_id)].type == gt.segments[static_cast<size_t>(g)].type;
    }
    m.res_error = res.per_segment[static_cast<size_t>(g)];
    rep.segments.push_back(m);
  }
  return rep;
}

std::string metrics_to_json(const MetricsReport& r) {
  json segs = json::array();
  for (const auto& s : r.segments) {
    json e{{"gt_id", s.gt_id}, {"pred_id", s.pred_id}, {"iou", s.iou}, {"type_match", s.type_match}};
    if (std::isnan(s.res_error)) e["res_error"] = nullptr;
    else e["res_error"] = s.res_error;
    segs.push_back(std::move(e));
  }
  json j{{"seg_iou", r.seg_iou},
         {"type_iou", r.type_iou},
         {"res_error", r.res_error},
         {"p_coverage", r.p_coverage},
         {"res_error_skipped", r.res_error_skipped},
         {"segments", segs}};
  return j.dump(2) + "\n";
}

std::string metrics_table(const MetricsReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(12) << "metric" << std::right << std::setw(10) << "value" << '\n';
  out << std::left << std::setw(12) << "seg_iou" << std::right << std::setw(10) << r.seg_iou << '\n';
  out << std::left << std::setw(12) << "type_iou" << std::right << std::setw(10) << r.type_iou << '\n';
  out << std::left << std::setw(12) << "res_error" << std::right << std::setw(10) << r.res_error << '\n';
  out << std::left << std::setw(12) << "p_coverage" << std::right << std::setw(10) << r.p_coverage << '\n';
  out << '\n';
  out << std::right << std::setw(6) << "gt" << std::setw(6) << "pred" << std::setw(10) << "iou" << std::setw(7)
      << "type" << std::setw(12) << "res_error" << '\n';
  for (const auto& s : r.segments) {
    out << std::setw(6) << s.gt_id << std::setw(6) << s.pred_id << std::setw(10) << s.iou << std::setw(7)
        << (s.type_match ? "yes" : "no") << std::setw(12);
    if (std::isnan(s.res_error)) out << "-";
    else out << s.res_error;
    out << '\n';
  }
  return out.str();
}

}  // namespace primseg
