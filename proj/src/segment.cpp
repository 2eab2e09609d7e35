#include "primseg/segment.hpp"

#include "primseg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace primseg {

namespace {

PointAttributes subset_rows(const PointAttributes& a, const std::vector<int>& idx) {
  PointAttributes out;
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.descriptors.resize(n, a.descriptors.cols());
  out.type_dist.resize(n, kNumTypes);
  out.params.resize(n, kParamDim);
  out.confidence.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int i = idx[static_cast<size_t>(r)];
    out.descriptors.row(r) = a.descriptors.row(i);
    out.type_dist.row(r) = a.type_dist.row(i);
    out.params.row(r) = a.params.row(i);
    out.confidence(r) = a.confidence(i);
  }
  return out;
}

SpectralEmbedding embed(const EigenPairs& pairs, const HyperParams& hp, EmbeddingScale scale) {
  Eigen::Index positive = 0;
  while (positive < pairs.values.size() && pairs.values(positive) > 1e-12 * pairs.values(0)) ++positive;
  const int d_max = static_cast<int>(std::min<Eigen::Index>(hp.d_max, std::max<Eigen::Index>(positive, 1)));
  const int d_min = std::min(hp.d_min, d_max);
  const int d = select_embedding_dim(pairs.values, d_min, d_max);
  return make_embedding(pairs, d, scale);
}

template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw Error(e.what(), stage);
  }
}

}  // namespace

PointAttributes prepare_attributes(const Cloud& cloud, const std::optional<PointAttributes>& given,
                                   const PipelineConfig& cfg, const NormalizeTransform& transform) {
  if (given) {
    if (given->size() != cloud.size())
      throw Error("length mismatch: " + std::to_string(given->size()) + " attribute rows for " +
                      std::to_string(cloud.size()) + " points",
                  "attributes");
    given->validate();
    PointAttributes a = *given;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      Params s = a.point_params(i);
      for (int t = 0; t < kNumAnalyticTypes; ++t) s = transform_params(static_cast<PrimitiveType>(t), s, transform);
      a.params.row(i) = s.transpose();
    }
    return a;
  }
  const int k = static_cast<int>(std::min<Eigen::Index>(std::max(cfg.k, cfg.estimation.k_fit), cloud.size() - 1));
  const NeighborGraph graph = knn_graph(cloud, k);
  return estimate_point_attributes(cloud, graph, cfg.estimation);
}

double feature_spread(const Eigen::MatrixXd& F) {
  if (F.rows() == 0 || F.cols() == 0) return 0.0;
  const Eigen::RowVectorXd mean = F.colwise().mean();
  return std::sqrt((F.rowwise() - mean).squaredNorm() / double(F.rows() * F.cols()));
}

FeatureBundle make_bundle(const Eigen::MatrixXd& descriptors, const SpectralEmbedding& consistency,
                          const SpectralEmbedding& smoothness, const HyperParams& hp) {
  FeatureBundle b;
  auto add = [&](Eigen::MatrixXd values, FeatureRole role, double factor) {
    const double spread = feature_spread(values);
    b.features.push_back({std::move(values), role, factor * (spread > 0 ? spread : 1.0)});
  };
  add(descriptors, FeatureRole::Semantic, hp.sigma_semantic);
  for (Eigen::Index j = 0; j < consistency.dim(); ++j)
    add(consistency.features.col(j), FeatureRole::Consistency, hp.sigma_consistency);
  for (Eigen::Index j = 0; j < smoothness.dim(); ++j)
    add(smoothness.features.col(j), FeatureRole::Smoothness, hp.sigma_smoothness);
  return b;
}

FeatureStage build_features(const Cloud& cloud, const std::optional<PointAttributes>& attrs,
                            const PipelineConfig& cfg) {
  if (cloud.size() < 2) throw Error("segmentation needs at least two points", "input");
  FeatureStage st;
  Cloud norm = cloud;
  if (cfg.normalize) {
    NormalizedCloud nc = staged("normalize", [&] { return normalize_cloud(cloud); });
    norm = std::move(nc.cloud);
    st.transform = nc.transform;
  }
  if (!norm.has_normals()) {
    const int k = static_cast<int>(std::min<Eigen::Index>(cfg.k, norm.size() - 1));
    const NeighborGraph g = staged("normals", [&] { return knn_graph(norm, k); });
    norm = norm.with_normals(estimate_normals(norm, g));
  }
  st.full = norm;
  st.full_attrs = staged("attributes", [&] { return prepare_attributes(st.full, attrs, cfg, st.transform); });

  const Eigen::Index n = st.full.size();
  if (n > cfg.dense_cap) {
    st.working = farthest_point_sample(st.full.positions(), static_cast<int>(cfg.dense_cap));
  } else {
    st.working.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) st.working[static_cast<size_t>(i)] = static_cast<int>(i);
  }
  st.cloud = st.full.subset(st.working);
  st.attrs = subset_rows(st.full_attrs, st.working);

  const Eigen::Index m = st.cloud.size();
  const int count = static_cast<int>(std::min<Eigen::Index>(cfg.hp.d_max + 1, m));
  EigsOptions eo;
  eo.seed = cfg.seed ^ 0x5eedULL;

  st.consistency = staged("consistency", [&] {
    const Eigen::MatrixXd Ac = build_consistency_matrix(st.cloud, st.attrs, cfg.hp.sigma_per_type, cfg.dense_cap, cfg.cone);
    return embed(top_eigenpairs(Ac, count, eo), cfg.hp, cfg.scale);
  });
  st.smoothness = staged("smoothness", [&] {
    const int k = static_cast<int>(std::min<Eigen::Index>(cfg.k, m - 1));
    const SparseMatrix As = build_smoothness_matrix(st.cloud, knn_graph(st.cloud, k), cfg.hp.sigma_e);
    return embed(top_eigenpairs(As, count, eo), cfg.hp, cfg.scale);
  });
  st.bundle = make_bundle(st.attrs.descriptors, st.consistency, st.smoothness, cfg.hp);
  return st;
}

PrimitiveType vote_type(const PointAttributes& attrs, const std::vector<int>& members) {
  std::array<int, kNumTypes> votes{};
  for (int i : members) ++votes[static_cast<size_t>(type_code(attrs.argmax_type(i)))];
  // max_element returns the first maximum, which is the lower type code.
  return static_cast<PrimitiveType>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::vector<int> propagate_labels(const Points<double>& all, const std::vector<int>& working,
                                  const std::vector<int>& working_labels) {
  const Eigen::Index n = all.rows();
  std::vector<int> out(static_cast<size_t>(n));
  if (static_cast<Eigen::Index>(working.size()) == n) {
    for (size_t r = 0; r < working.size(); ++r) out[static_cast<size_t>(working[r])] = working_labels[r];
    return out;
  }
  Points<double> sub(static_cast<Eigen::Index>(working.size()), 3);
  for (size_t r = 0; r < working.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = all.row(working[r]);
  const KdTree tree(sub);
  parallel_for(n, [&](std::ptrdiff_t i) {
    out[static_cast<size_t>(i)] = working_labels[static_cast<size_t>(tree.nearest(all.row(i).transpose()).index)];
  });
  return out;
}

std::vector<int> merge_adjacent_segments(const Cloud& cloud, const PointAttributes& attrs, std::vector<int> labels,
                                         const NeighborGraph& graph, const FitOptions& fit) {
  labels = canonical_labels(labels);
  while (true) {
    const Segmentation seg = segmentation_from_labels(labels);
    const auto members = seg.members();
    const int K = seg.count();
    std::vector<PrimitiveType> types(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) types[static_cast<size_t>(k)] = vote_type(attrs, members[static_cast<size_t>(k)]);

    std::map<std::pair<int, int>, int> edges;
    for (Eigen::Index i = 0; i < graph.size(); ++i)
      for (int c = 0; c < graph.k; ++c) {
        const int a = labels[static_cast<size_t>(i)], b = labels[static_cast<size_t>(graph.indices(i, c))];
        if (a != b && types[static_cast<size_t>(a)] == types[static_cast<size_t>(b)] &&
            is_analytic(types[static_cast<size_t>(a)]))
          ++edges[{std::min(a, b), std::max(a, b)}];
      }
    std::vector<std::pair<int, std::pair<int, int>>> order;
    for (const auto& [pair, count] : edges) order.push_back({-count, pair});
    std::sort(order.begin(), order.end());

    bool merged = false;
    for (const auto& [neg, pair] : order) {
      std::vector<int> both = members[static_cast<size_t>(pair.first)];
      const auto& other = members[static_cast<size_t>(pair.second)];
      both.insert(both.end(), other.begin(), other.end());
      try {
        const FitResult r = refit_segment_primitive(cloud, both, types[static_cast<size_t>(pair.first)], fit);
        if (!(r.rms_residual <= fit.inlier_threshold)) continue;
      } catch (const Error&) {
        continue;
      }
      for (int& l : labels)
        if (l == pair.second) l = pair.first;
      labels = canonical_labels(labels);
      merged = true;
      break;
    }
    if (!merged) return labels;
  }
}

Segmentation segment(const Cloud& cloud, const std::optional<PointAttributes>& attrs, const PipelineConfig& cfg,
                     PipelineTrace* trace) {
  FeatureStage st = build_features(cloud, attrs, cfg);
  const WeightVector weights = staged("weighting", [&] { return compute_weights(st.bundle, cfg.weights); });
  const Eigen::MatrixXd X = assemble_feature_space(st.bundle, weights.w);
  double h = cfg.hp.bandwidth;
  if (!(h > 0)) h = cfg.hp.bandwidth_factor * median_pairwise_distance(X);
  if (!(h > 0)) h = 1.0;  // every feature row identical: a single cluster
  MeanShiftOptions ms = cfg.mean_shift;
  ms.bandwidth = h;
  ClusterResult clusters = staged("clustering", [&] { return mean_shift(X, ms); });

  std::vector<int> labels = propagate_labels(st.full.positions(), st.working, clusters.labels);
  if (cfg.merge_adjacent && st.full.size() > 1) {
    labels = staged("merging", [&] {
      const int k = static_cast<int>(std::min<Eigen::Index>(cfg.merge_k, st.full.size() - 1));
      return merge_adjacent_segments(st.full, st.full_attrs, labels, knn_graph(st.full, k), cfg.fit);
    });
  }
  Segmentation seg = segmentation_from_labels(labels);
  const auto members = seg.members();
  const NormalizeTransform back = st.transform.inverse();
  std::vector<std::string> warnings = st.warnings;
  warnings.insert(warnings.end(), weights.warnings.begin(), weights.warnings.end());

  for (size_t k = 0; k < seg.segments.size(); ++k) {
    SegmentInfo& info = seg.segments[k];
    info.type = vote_type(st.full_attrs, members[k]);
    if (static_cast<int>(members[k].size()) < min_fit_points(info.type)) {
      warnings.push_back("segment " + std::to_string(k) + " too small to fit");
      continue;
    }
    try {
      const FitResult fit = refit_segment_primitive(st.full, members[k], info.type, cfg.fit);
      info.rms_residual = fit.rms_residual / st.transform.scale;
      if (fit.patch) info.patch = transform_patch(*fit.patch, back);
      else info.params = transform_params(info.type, fit.params, back);
    } catch (const Error& e) {
      warnings.push_back("segment " + std::to_string(k) + " fit failed: " + e.what());
    }
  }

  if (trace) {
    trace->working = st.working;
    trace->consistency = st.consistency;
    trace->smoothness = st.smoothness;
    trace->bundle = std::move(st.bundle);
    trace->weights = weights;
    trace->bandwidth = h;
    trace->clusters = std::move(clusters);
    trace->warnings = std::move(warnings);
  }
  return seg;
}

}  // namespace primseg
