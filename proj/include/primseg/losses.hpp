#pragma once

#include "primseg/attributes.hpp"
#include "primseg/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace primseg {

struct LossConfig {
  double alpha = 1.0;
  double beta = 0.1;
  double lambda_pull = 1.0;
  double nu_push = 1.0;
  double delta1 = 0.5;
  double delta2 = 1.5;

  void validate() const;
};

struct EmbeddingLoss {
  double value = 0;
  double pull = 0;
  double push = 0;
  Eigen::MatrixXd gradient;  ///< same shape as the descriptors
};

/// λ L_pull + ν L_push with unsquared hinges. Group means depend on the
/// descriptors, and the gradient accounts for that.
EmbeddingLoss embedding_loss(const Eigen::MatrixXd& descriptors, const std::vector<int>& labels,
                             const LossConfig& cfg = {});

/// Mean of −log max(pred(i, gt_i), 1e-12).
double type_loss(const TypeMatrix& pred, const std::vector<int>& gt_types);

/// Mean squared Euclidean distance between parameter rows.
double param_loss(const ParamMatrix& pred, const ParamMatrix& gt);

struct LossParts {
  double embedding = 0;
  double type = 0;
  double param = 0;
};

/// embedding + α type + β param.
double total_loss(const LossParts& parts, const LossConfig& cfg = {});

}  // namespace primseg
