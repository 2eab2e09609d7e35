#include "primseg/geometry.hpp"

#include "primseg/parallel.hpp"

#include <limits>
#include <numeric>
#include <queue>

namespace primseg {

double diameter_estimate(const Points<double>& positions) {
  const Eigen::Index n = positions.rows();
  constexpr Eigen::Index kExactLimit = 2048;
  std::vector<Eigen::Index> idx;
  if (n <= kExactLimit) {
    idx.resize(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
  } else {
    // Farthest pair of the subsample equals the farthest pair of its hull.
    idx.reserve(kExactLimit);
    for (Eigen::Index k = 0; k < kExactLimit; ++k) idx.push_back(k * n / kExactLimit);
  }
  double best = 0;
  for (size_t a = 0; a < idx.size(); ++a)
    for (size_t b = a + 1; b < idx.size(); ++b)
      best = std::max(best, (positions.row(idx[a]) - positions.row(idx[b])).squaredNorm());
  return std::sqrt(best);
}

NormalizedCloud normalize_cloud(const Cloud& cloud) {
  if (cloud.size() == 0) throw Error("empty input", "normalize");
  const Eigen::RowVector3d mean = cloud.positions().colwise().mean();
  Points<double> centered = cloud.positions().rowwise() - mean;
  const double diam = diameter_estimate(centered);
  if (!(diam > 0)) throw Error("degenerate cloud", "normalize");
  NormalizeTransform t{-mean.transpose(), 1.0 / diam};
  centered *= t.scale;
  std::optional<Points<double>> normals;
  if (cloud.has_normals()) normals = cloud.normals();
  return {Cloud(std::move(centered), std::move(normals)), t};
}

Cloud apply_inverse(const Cloud& cloud, const NormalizeTransform& t) {
  Points<double> p = cloud.positions() / t.scale;
  p.rowwise() -= t.translation.transpose();
  std::optional<Points<double>> normals;
  if (cloud.has_normals()) normals = cloud.normals();
  return Cloud(std::move(p), std::move(normals));
}

Params transform_params(PrimitiveType type, const Params& s, const NormalizeTransform& t) {
  Params out = s;
  const double c = t.scale;
  switch (type) {
    case PrimitiveType::Plane:
      out(slot::plane_d) = c * (s(slot::plane_d) + s.segment<3>(slot::plane_n).dot(t.translation));
      break;
    case PrimitiveType::Sphere:
      out.segment<3>(slot::sphere_o) = t.apply(s.segment<3>(slot::sphere_o));
      out(slot::sphere_r) = c * s(slot::sphere_r);
      break;
    case PrimitiveType::Cylinder:
      out.segment<3>(slot::cyl_o) = t.apply(s.segment<3>(slot::cyl_o));
      out(slot::cyl_r) = c * s(slot::cyl_r);
      break;
    case PrimitiveType::Cone:
      out.segment<3>(slot::cone_o) = t.apply(s.segment<3>(slot::cone_o));
      break;
    default:
      break;
  }
  return out;
}

Patch transform_patch(const Patch& patch, const NormalizeTransform& t) {
  Points<double> c = patch.control();
  c.rowwise() += t.translation.transpose();
  c *= t.scale;
  return Patch(patch.rows(), patch.cols(), std::move(c), patch.closed_u());
}

// ---------------------------------------------------------------------------

struct KdTree::Impl {
  struct Node {
    int begin, end;      // range in order
    int left = -1, right = -1;
    int axis = -1;
    double split = 0;
  };

  const Points<double>* pts;
  std::vector<int> order;
  std::vector<Node> nodes;
  static constexpr int kLeaf = 12;

  explicit Impl(const Points<double>& p) : pts(&p) {
    order.resize(static_cast<size_t>(p.rows()));
    std::iota(order.begin(), order.end(), 0);
    nodes.reserve(order.size() / 4 + 1);
    if (!order.empty()) build(0, static_cast<int>(order.size()));
  }

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({begin, end});
    if (end - begin <= kLeaf) return id;
    Eigen::RowVector3d lo = pts->row(order[begin]), hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(pts->row(order[i]));
      hi = hi.cwiseMax(pts->row(order[i]));
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](int a, int b) { return (*pts)(a, axis) < (*pts)(b, axis); });
    const double split = (*pts)(order[mid], axis);
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes[id].axis = axis;
    nodes[id].split = split;
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }

  struct Cmp {
    bool operator()(const Hit& a, const Hit& b) const {
      return a.sq_distance < b.sq_distance || (a.sq_distance == b.sq_distance && a.index < b.index);
    }
  };
  using Heap = std::priority_queue<Hit, std::vector<Hit>, Cmp>;

  void search(int id, const Vec3d& q, size_t k, int exclude, Heap& heap) const {
    const Node& nd = nodes[id];
    if (nd.axis < 0) {
      for (int i = nd.begin; i < nd.end; ++i) {
        const int idx = order[i];
        if (idx == exclude) continue;
        const Hit h{idx, (pts->row(idx).transpose() - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push(h);
        } else if (Cmp{}(h, heap.top())) {
          heap.pop();
          heap.push(h);
        }
      }
      return;
    }
    const double diff = q(nd.axis) - nd.split;
    const int near = diff < 0 ? nd.left : nd.right;
    const int far = diff < 0 ? nd.right : nd.left;
    search(near, q, k, exclude, heap);
    if (heap.size() < k || diff * diff <= heap.top().sq_distance) search(far, q, k, exclude, heap);
  }
};

KdTree::KdTree(const Points<double>& points) : impl_(std::make_unique<Impl>(points)) {}
KdTree::~KdTree() = default;
KdTree::KdTree(KdTree&&) noexcept = default;
KdTree& KdTree::operator=(KdTree&&) noexcept = default;

std::vector<KdTree::Hit> KdTree::knn(const Vec3d& q, int k, int exclude) const {
  Impl::Heap heap;
  if (k > 0 && !impl_->order.empty()) impl_->search(0, q, static_cast<size_t>(k), exclude, heap);
  std::vector<Hit> out(heap.size());
  for (size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  return out;
}

NeighborGraph knn_graph(const Cloud& cloud, int k) {
  const Eigen::Index n = cloud.size();
  if (n < 2) throw Error("knn graph needs at least two points", "knn");
  if (k < 1) throw Error("k must be positive", "knn");
  const int kk = static_cast<int>(std::min<Eigen::Index>(k, n - 1));
  NeighborGraph g;
  g.k = kk;
  g.indices.resize(n, kk);
  g.distances.resize(n, kk);
  const KdTree tree(cloud.positions());
  parallel_for(n, [&](std::ptrdiff_t i) {
    const auto hits = tree.knn(cloud.position(i), kk, static_cast<int>(i));
    for (int j = 0; j < kk; ++j) {
      g.indices(i, j) = hits[static_cast<size_t>(j)].index;
      g.distances(i, j) = std::sqrt(hits[static_cast<size_t>(j)].sq_distance);
    }
  });
  return g;
}

std::vector<int> farthest_point_sample(const Points<double>& positions, int count) {
  const Eigen::Index n = positions.rows();
  count = static_cast<int>(std::min<Eigen::Index>(count, n));
  std::vector<int> picked;
  if (count <= 0) return picked;
  picked.reserve(static_cast<size_t>(count));
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  int current = 0;
  for (int c = 0; c < count; ++c) {
    picked.push_back(current);
    const Eigen::RowVector3d p = positions.row(current);
    int next = 0;
    double far = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      dist(i) = std::min(dist(i), (positions.row(i) - p).squaredNorm());
      if (dist(i) > far) {
        far = dist(i);
        next = static_cast<int>(i);
      }
    }
    current = next;
  }
  return picked;
}

double distance(const Vec3d& p, const Primitive& prim, ConeFormula cone) {
  if (is_analytic(prim.type)) return distance_point_primitive(p, prim.type, prim.params, cone);
  if (!prim.patch) throw Error("B-spline primitive without control patch");
  return bspline_closest_distance(*prim.patch, p);
}

}  // namespace primseg
