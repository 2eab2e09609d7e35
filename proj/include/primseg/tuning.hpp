#pragma once

#include "primseg/losses.hpp"
#include "primseg/segment.hpp"
#include "primseg/synth.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace primseg {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Slope of the least-squares linear fit to f over a design of `samples`
/// points: the center, then ±radius along each coordinate, then seeded random
/// sign patterns. Throws "insufficient samples" when the design is singular.
Eigen::VectorXd finite_diff_gradient(const Objective& f, const Eigen::VectorXd& x, int samples, double radius = 0.05,
                                     std::uint64_t seed = 0);

struct TuneOptions {
  int max_iter = 30;
  double armijo = 1e-4;
  int max_halvings = 20;
  /// Stop once an accepted step is shorter than this.
  double min_step = 1e-3;
  double initial_step = 1.0;
  double radius = 0.05;
  /// Gradient samples; 0 means 2 dim + 1.
  int samples = 0;
  std::uint64_t seed = 0;
};

struct TuneIteration {
  int iteration = 0;
  double objective = 0;
  double step = 0;  ///< length of the step that produced this iterate
  Eigen::VectorXd x;
};

struct TuneResult {
  Eigen::VectorXd x;
  double objective = 0;
  double last_step = 0;
  int iterations = 0;
  std::string stop_reason;  ///< "step size", "max iterations", "line search", "objective failure"
  std::vector<TuneIteration> trace;  ///< entry 0 is the start point
};

/// Gradient descent with finite-difference gradients and Armijo backtracking.
/// Accepted objective values never increase.
TuneResult tune(const Objective& f, const Eigen::VectorXd& x0, const TuneOptions& opts = {});

// ---------------------------------------------------------------------------
// Pipeline hyperparameters

/// Names of the tuned coordinates, in vector order.
std::vector<std::string> hyper_names();
/// Log of each tuned positive hyperparameter.
Eigen::VectorXd hyper_to_log(const HyperParams& hp);
/// Inverse of hyper_to_log; untuned fields are taken from `base`.
HyperParams hyper_from_log(const Eigen::VectorXd& x, const HyperParams& base);

struct ValidationScene {
  Cloud cloud;
  std::vector<int> labels;
  std::optional<PointAttributes> attrs;
};

/// Embedding loss of the weighted feature space against the ground-truth
/// labels, averaged over scenes. Labels of subsampled points are taken at
/// the working indices.
double validation_objective(const std::vector<ValidationScene>& scenes, const PipelineConfig& cfg,
                            const LossConfig& loss = {});

struct HyperTuneResult {
  HyperParams hp;
  TuneResult run;
};

HyperTuneResult tune_hyperparams(const std::function<double(const HyperParams&)>& objective, const HyperParams& hp0,
                                 const TuneOptions& opts = {});

/// CSV with iteration, objective, step size and every tuned value.
std::string format_trace_csv(const TuneResult& run);

}  // namespace primseg
