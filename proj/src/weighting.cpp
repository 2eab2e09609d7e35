#include "primseg/weighting.hpp"

#include "primseg/parallel.hpp"

#include <cmath>
#include <sstream>

namespace primseg {

std::string_view role_name(FeatureRole role) {
  switch (role) {
    case FeatureRole::Semantic: return "semantic";
    case FeatureRole::Consistency: return "consistency";
    case FeatureRole::Smoothness: return "smoothness";
  }
  return "unknown";
}

Eigen::Index FeatureBundle::total_cols() const {
  Eigen::Index m = 0;
  for (const auto& f : features) m += f.values.cols();
  return m;
}

void FeatureBundle::validate() const {
  if (features.empty()) throw Error("feature bundle is empty", "weighting");
  int semantic = 0;
  for (const auto& f : features) {
    if (f.values.rows() != rows()) throw Error("features disagree on point count", "weighting");
    if (f.values.cols() < 1) throw Error("feature without columns", "weighting");
    if (!(f.sigma > 0)) throw Error("entropy bandwidth must be positive", "weighting");
    if (f.role == FeatureRole::Semantic) ++semantic;
  }
  if (semantic > 1) throw Error("more than one semantic feature", "weighting");
}

Eigen::VectorXd log_density(const Eigen::MatrixXd& F, double sigma) {
  if (!(sigma > 0)) throw Error("entropy bandwidth must be positive", "weighting");
  const Eigen::Index n = F.rows();
  const double m = double(F.cols());
  const double log_norm = -std::log(double(n)) - 0.5 * m * std::log(2 * M_PI) - m * std::log(sigma);
  const double inv = 1.0 / (2 * sigma * sigma);
  const Eigen::VectorXd sq = F.rowwise().squaredNorm();
  Eigen::VectorXd out(n);
  constexpr std::ptrdiff_t kChunk = 128;
  const std::ptrdiff_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::ptrdiff_t c) {
    const Eigen::Index r0 = c * kChunk, rows = std::min<Eigen::Index>(kChunk, n - r0);
    Eigen::MatrixXd D = -2.0 * F.middleRows(r0, rows) * F.transpose();
    D.colwise() += sq.segment(r0, rows);
    D.rowwise() += sq.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      // The self term has distance 0, so the largest exponent is 0 and the
      // sum is at least 1.
      double s = 0;
      for (Eigen::Index j = 0; j < n; ++j) s += std::exp(-std::max(D(r, j), 0.0) * inv);
      out(r0 + r) = log_norm + std::log(s);
    }
  });
  return out;
}

double feature_entropy(const Eigen::MatrixXd& F, double sigma) {
  if (F.rows() < 1) throw Error("entropy of an empty feature", "weighting");
  const Eigen::VectorXd lp = log_density(F, sigma);
  double h = 0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) h -= std::exp(lp(i)) * lp(i);
  return h;
}

WeightVector weights_from_entropies(const Eigen::VectorXd& entropies, const WeightOptions& opts) {
  WeightVector out;
  out.entropies = entropies;
  out.raw.resize(entropies.size());
  std::ostringstream clamped;
  for (Eigen::Index l = 0; l < entropies.size(); ++l) {
    const double h = entropies(l);
    if (!(h > 0) || 1.0 / h > opts.max_raw_weight) {
      out.raw(l) = opts.max_raw_weight;
      clamped << (clamped.tellp() > 0 ? "," : "") << l;
    } else {
      out.raw(l) = 1.0 / h;
    }
  }
  if (clamped.tellp() > 0) {
    std::ostringstream msg;
    msg << "raw weight clamped to " << opts.max_raw_weight << " for features " << clamped.str();
    out.warnings.push_back(msg.str());
  }
  out.w = out.raw / out.raw.norm();
  return out;
}

WeightVector compute_weights(const FeatureBundle& bundle, const WeightOptions& opts) {
  bundle.validate();
  Eigen::VectorXd h(static_cast<Eigen::Index>(bundle.features.size()));
  for (size_t l = 0; l < bundle.features.size(); ++l)
    h(static_cast<Eigen::Index>(l)) = feature_entropy(bundle.features[l].values, bundle.features[l].sigma);
  return weights_from_entropies(h, opts);
}

Eigen::MatrixXd assemble_feature_space(const FeatureBundle& bundle, const Eigen::VectorXd& weights) {
  bundle.validate();
  if (weights.size() != static_cast<Eigen::Index>(bundle.features.size()))
    throw Error("weight count does not match feature count", "weighting");
  Eigen::MatrixXd X(bundle.rows(), bundle.total_cols());
  Eigen::Index c = 0;
  for (size_t l = 0; l < bundle.features.size(); ++l) {
    const auto& F = bundle.features[l].values;
    X.middleCols(c, F.cols()) = weights(static_cast<Eigen::Index>(l)) * F;
    c += F.cols();
  }
  return X;
}

}  // namespace primseg
