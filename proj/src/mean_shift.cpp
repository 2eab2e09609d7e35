#include "primseg/mean_shift.hpp"

#include "primseg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace primseg {

Eigen::MatrixXd mean_shift_modes(const Eigen::MatrixXd& X, const MeanShiftOptions& opts) {
  if (!(opts.bandwidth > 0)) throw Error("bandwidth must be positive", "mean-shift");
  const Eigen::Index n = X.rows();
  const double inv = 1.0 / (2 * opts.bandwidth * opts.bandwidth);
  const double tol = opts.tol_factor * opts.bandwidth;
  const Eigen::VectorXd sq = X.rowwise().squaredNorm();

  Eigen::MatrixXd Y = X;
  std::vector<Eigen::Index> active(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) active[static_cast<size_t>(i)] = i;

  constexpr std::ptrdiff_t kChunk = 64;
  for (int it = 0; it < opts.max_iter && !active.empty(); ++it) {
    const auto count = static_cast<std::ptrdiff_t>(active.size());
    std::vector<char> done(active.size(), 0);
    parallel_for((count + kChunk - 1) / kChunk, [&](std::ptrdiff_t c) {
      const std::ptrdiff_t a0 = c * kChunk, rows = std::min(kChunk, count - a0);
      Eigen::MatrixXd S(rows, X.cols());
      for (std::ptrdiff_t r = 0; r < rows; ++r) S.row(r) = Y.row(active[static_cast<size_t>(a0 + r)]);
      Eigen::MatrixXd K = -2.0 * S * X.transpose();
      K.colwise() += S.rowwise().squaredNorm();
      K.rowwise() += sq.transpose();
      for (std::ptrdiff_t r = 0; r < rows; ++r) {
        // Shift exponents by the nearest sample so the largest weight is 1.
        const double lo = std::max(K.row(r).minCoeff(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) K(r, j) = std::exp(-(std::max(K(r, j), 0.0) - lo) * inv);
      }
      const Eigen::VectorXd norm = K.rowwise().sum();
      const Eigen::MatrixXd next = (K * X).array().colwise() / norm.array();
      for (std::ptrdiff_t r = 0; r < rows; ++r) {
        const Eigen::Index i = active[static_cast<size_t>(a0 + r)];
        const double shift = (next.row(r) - Y.row(i)).norm();
        Y.row(i) = next.row(r);
        if (shift < tol) done[static_cast<size_t>(a0 + r)] = 1;
      }
    });
    std::vector<Eigen::Index> still;
    for (size_t a = 0; a < active.size(); ++a)
      if (!done[a]) still.push_back(active[a]);
    active.swap(still);
  }
  return Y;
}

ClusterResult mean_shift(const Eigen::MatrixXd& X, const MeanShiftOptions& opts) {
  const Eigen::Index n = X.rows();
  if (n == 0) throw Error("mean-shift on an empty set", "mean-shift");
  const Eigen::MatrixXd Y = mean_shift_modes(X, opts);
  const double merge = opts.merge_factor * opts.bandwidth;

  // Greedy merge in seed order: each converged point joins the first
  // existing mode within the merge radius.
  std::vector<Eigen::Index> mode_seed;
  std::vector<int> assign(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int found = -1;
    double best = merge;
    for (size_t c = 0; c < mode_seed.size(); ++c) {
      const double d = (Y.row(i) - Y.row(mode_seed[c])).norm();
      if (d <= best) {
        best = d;
        found = static_cast<int>(c);
      }
    }
    if (found < 0) {
      found = static_cast<int>(mode_seed.size());
      mode_seed.push_back(i);
    }
    assign[static_cast<size_t>(i)] = found;
  }

  std::vector<int> size(mode_seed.size(), 0);
  for (int a : assign) ++size[static_cast<size_t>(a)];
  std::vector<char> keep(mode_seed.size(), 0);
  bool any = false;
  for (size_t c = 0; c < mode_seed.size(); ++c) any |= (keep[c] = size[c] >= opts.min_size);
  if (!any) keep[static_cast<size_t>(std::max_element(size.begin(), size.end()) - size.begin())] = 1;

  for (Eigen::Index i = 0; i < n; ++i) {
    int& a = assign[static_cast<size_t>(i)];
    if (keep[static_cast<size_t>(a)]) continue;
    double best = std::numeric_limits<double>::infinity();
    int target = -1;
    for (size_t c = 0; c < mode_seed.size(); ++c) {
      if (!keep[c]) continue;
      const double d = (Y.row(i) - Y.row(mode_seed[c])).squaredNorm();
      if (d < best) {
        best = d;
        target = static_cast<int>(c);
      }
    }
    a = target;
  }

  ClusterResult out;
  std::vector<int> relabel(mode_seed.size(), -1);
  out.labels.resize(static_cast<size_t>(n));
  std::vector<Eigen::Index> rep;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = assign[static_cast<size_t>(i)];
    if (relabel[static_cast<size_t>(a)] < 0) {
      relabel[static_cast<size_t>(a)] = static_cast<int>(rep.size());
      rep.push_back(mode_seed[static_cast<size_t>(a)]);
      out.sizes.push_back(0);
    }
    const int l = relabel[static_cast<size_t>(a)];
    out.labels[static_cast<size_t>(i)] = l;
    ++out.sizes[static_cast<size_t>(l)];
  }
  out.modes.resize(static_cast<Eigen::Index>(rep.size()), X.cols());
  for (size_t c = 0; c < rep.size(); ++c) out.modes.row(static_cast<Eigen::Index>(c)) = Y.row(rep[c]);
  return out;
}

double median_pairwise_distance(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) return 0.0;
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((X.row(i) - X.row(j)).norm());
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(d.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace primseg
