#include "primseg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace primseg {

void LossConfig::validate() const {
  if (alpha < 0 || beta < 0 || lambda_pull < 0 || nu_push < 0 || delta1 < 0 || delta2 < 0)
    throw Error("loss weights and margins must be nonnegative", "loss");
  if (!(delta2 > delta1)) throw Error("delta2 must exceed delta1", "loss");
}

EmbeddingLoss embedding_loss(const Eigen::MatrixXd& d, const std::vector<int>& labels, const LossConfig& cfg) {
  const Eigen::Index n = d.rows(), m = d.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw Error("label count does not match descriptors", "loss");
  if (n == 0) throw Error("embedding loss of an empty set", "loss");

  // Dense group ids in order of first appearance.
  std::vector<int> group(static_cast<size_t>(n));
  std::vector<int> ids;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<size_t>(i)];
    auto it = std::find(ids.begin(), ids.end(), l);
    if (it == ids.end()) {
      ids.push_back(l);
      it = ids.end() - 1;
    }
    group[static_cast<size_t>(i)] = static_cast<int>(it - ids.begin());
  }
  const int K = static_cast<int>(ids.size());

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(K, m);
  Eigen::VectorXd size = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < n; ++i) {
    mean.row(group[static_cast<size_t>(i)]) += d.row(i);
    size(group[static_cast<size_t>(i)]) += 1;
  }
  mean.array().colwise() /= size.array();

  EmbeddingLoss out;
  out.gradient = Eigen::MatrixXd::Zero(n, m);

  // Pull. g_i = unit(d_i − μ_k) for active hinges; the mean contributes
  // −(1/|P_k|) Σ_active g_i to every member of the group.
  Eigen::MatrixXd active_sum = Eigen::MatrixXd::Zero(K, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = group[static_cast<size_t>(i)];
    const Eigen::RowVectorXd diff = d.row(i) - mean.row(k);
    const double len = diff.norm();
    const double h = len - cfg.delta1;
    if (h <= 0) continue;
    const double c = 1.0 / (K * size(k));
    out.pull += c * h;
    const Eigen::RowVectorXd g = diff / len;
    out.gradient.row(i) += cfg.lambda_pull * c * g;
    active_sum.row(k) += cfg.lambda_pull * c * g;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = group[static_cast<size_t>(i)];
    out.gradient.row(i) -= active_sum.row(k) / size(k);
  }

  // Push over unordered pairs of group means.
  if (K > 1) {
    const double c = 1.0 / (double(K) * (K - 1));
    Eigen::MatrixXd mean_grad = Eigen::MatrixXd::Zero(K, m);
    for (int a = 0; a < K; ++a)
      for (int b = a + 1; b < K; ++b) {
        const Eigen::RowVectorXd diff = mean.row(a) - mean.row(b);
        const double len = diff.norm();
        const double h = cfg.delta2 - len;
        if (h <= 0) continue;
        out.push += c * h;
        if (len > 0) {
          const Eigen::RowVectorXd e = diff / len;
          mean_grad.row(a) -= cfg.nu_push * c * e;
          mean_grad.row(b) += cfg.nu_push * c * e;
        }
      }
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = group[static_cast<size_t>(i)];
      out.gradient.row(i) += mean_grad.row(k) / size(k);
    }
  }
  out.value = cfg.lambda_pull * out.pull + cfg.nu_push * out.push;
  return out;
}

double type_loss(const TypeMatrix& pred, const std::vector<int>& gt_types) {
  if (static_cast<Eigen::Index>(gt_types.size()) != pred.rows()) throw Error("type count mismatch", "loss");
  if (pred.rows() == 0) return 0.0;
  double s = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const int t = gt_types[static_cast<size_t>(i)];
    if (t < 0 || t >= kNumTypes) throw Error("invalid ground-truth type code", "loss");
    s -= std::log(std::max(pred(i, t), 1e-12));
  }
  return s / double(pred.rows());
}

double param_loss(const ParamMatrix& pred, const ParamMatrix& gt) {
  if (pred.rows() != gt.rows()) throw Error("parameter row count mismatch", "loss");
  if (pred.rows() == 0) return 0.0;
  return (pred - gt).rowwise().squaredNorm().sum() / double(pred.rows());
}

double total_loss(const LossParts& parts, const LossConfig& cfg) {
  return parts.embedding + cfg.alpha * parts.type + cfg.beta * parts.param;
}

}  // namespace primseg
