#include "primseg/tuning.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace primseg {

Eigen::VectorXd finite_diff_gradient(const Objective& f, const Eigen::VectorXd& x, int samples, double radius,
                                     std::uint64_t seed) {
  const Eigen::Index dim = x.size();
  if (samples < dim + 1) throw Error("insufficient samples", "tuning");
  Eigen::MatrixXd design(samples, dim + 1);
  Eigen::VectorXd values(samples);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(dim);
    if (s == 0) {
      // center
    } else if (s <= 2 * dim) {
      const Eigen::Index axis = (s - 1) / 2;
      delta(axis) = (s % 2 == 1) ? radius : -radius;
    } else {
      for (Eigen::Index d = 0; d < dim; ++d) delta(d) = coin(rng) ? radius : -radius;
    }
    design(s, 0) = 1.0;
    design.row(s).tail(dim) = delta.transpose();
    values(s) = f(x + delta);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < dim + 1) throw Error("insufficient samples", "tuning");
  const Eigen::VectorXd beta = qr.solve(values);
  return beta.tail(dim);
}

TuneResult tune(const Objective& f, const Eigen::VectorXd& x0, const TuneOptions& opts) {
  const int samples = opts.samples > 0 ? opts.samples : static_cast<int>(2 * x0.size() + 1);
  auto eval = [&](const Eigen::VectorXd& x) -> double {
    try {
      const double v = f(x);
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  TuneResult r;
  r.x = x0;
  r.objective = eval(x0);
  r.trace.push_back({0, r.objective, 0.0, x0});
  if (!std::isfinite(r.objective)) {
    r.stop_reason = "objective failure";
    return r;
  }
  r.stop_reason = "max iterations";
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::VectorXd g =
        finite_diff_gradient(eval, r.x, samples, opts.radius, opts.seed + static_cast<std::uint64_t>(it));
    if (!g.allFinite()) {
      r.stop_reason = "objective failure";
      break;
    }
    const double gg = g.squaredNorm();
    double t = opts.initial_step;
    bool accepted = false;
    double value = r.objective;
    Eigen::VectorXd next = r.x;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      next = r.x - t * g;
      value = eval(next);
      if (value <= r.objective - opts.armijo * t * gg) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      r.last_step = 0;
      r.stop_reason = "line search";
      break;
    }
    const double step = (next - r.x).norm();
    r.x = next;
    r.objective = value;
    r.last_step = step;
    r.iterations = it;
    r.trace.push_back({it, value, step, next});
    if (step < opts.min_step) {
      r.stop_reason = "step size";
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kLogMin = -13.815510557964274;  // log 1e-6
constexpr double kLogMax = 6.907755278982137;    // log 1e3
}  // namespace

std::vector<std::string> hyper_names() {
  return {"sigma_plane",     "sigma_sphere",      "sigma_cylinder",    "sigma_cone",      "sigma_e",
          "sigma_semantic", "sigma_consistency", "sigma_smoothness", "bandwidth_factor"};
}

Eigen::VectorXd hyper_to_log(const HyperParams& hp) {
  Eigen::VectorXd x(9);
  for (int t = 0; t < 4; ++t) x(t) = std::log(hp.sigma_per_type[static_cast<size_t>(t)]);
  x(4) = std::log(hp.sigma_e);
  x(5) = std::log(hp.sigma_semantic);
  x(6) = std::log(hp.sigma_consistency);
  x(7) = std::log(hp.sigma_smoothness);
  x(8) = std::log(hp.bandwidth_factor);
  return x;
}

HyperParams hyper_from_log(const Eigen::VectorXd& x, const HyperParams& base) {
  if (x.size() != 9) throw Error("hyperparameter vector must have 9 entries", "tuning");
  auto v = [&](Eigen::Index i) { return std::exp(std::clamp(x(i), kLogMin, kLogMax)); };
  HyperParams hp = base;
  for (int t = 0; t < 4; ++t) hp.sigma_per_type[static_cast<size_t>(t)] = v(t);
  hp.sigma_e = v(4);
  hp.sigma_semantic = v(5);
  hp.sigma_consistency = v(6);
  hp.sigma_smoothness = v(7);
  hp.bandwidth_factor = v(8);
  return hp;
}

double validation_objective(const std::vector<ValidationScene>& scenes, const PipelineConfig& cfg,
                            const LossConfig& loss) {
  if (scenes.empty()) throw Error("no validation scenes", "tuning");
  double total = 0;
  for (const auto& s : scenes) {
    const FeatureStage st = build_features(s.cloud, s.attrs, cfg);
    const WeightVector w = compute_weights(st.bundle, cfg.weights);
    const Eigen::MatrixXd X = assemble_feature_space(st.bundle, w.w);
    std::vector<int> labels(st.working.size());
    for (size_t r = 0; r < st.working.size(); ++r) labels[r] = s.labels[static_cast<size_t>(st.working[r])];
    total += embedding_loss(X, labels, loss).value;
  }
  return total / double(scenes.size());
}

HyperTuneResult tune_hyperparams(const std::function<double(const HyperParams&)>& objective, const HyperParams& hp0,
                                 const TuneOptions& opts) {
  const Objective f = [&](const Eigen::VectorXd& x) { return objective(hyper_from_log(x, hp0)); };
  HyperTuneResult out;
  out.run = tune(f, hyper_to_log(hp0), opts);
  out.hp = hyper_from_log(out.run.x, hp0);
  return out;
}

std::string format_trace_csv(const TuneResult& run) {
  std::ostringstream out;
  out << std::setprecision(12);
  const auto names = hyper_names();
  out << "iteration,objective,step";
  const bool named = !run.trace.empty() && run.trace.front().x.size() == static_cast<Eigen::Index>(names.size());
  for (Eigen::Index i = 0; !run.trace.empty() && i < run.trace.front().x.size(); ++i)
    out << ',' << (named ? names[static_cast<size_t>(i)] : "x" + std::to_string(i));
  out << '\n';
  for (const auto& t : run.trace) {
    out << t.iteration << ',' << t.objective << ',' << t.step;
    for (Eigen::Index i = 0; i < t.x.size(); ++i) out << ',' << (named ? std::exp(t.x(i)) : t.x(i));
    out << '\n';
  }
  return out.str();
}

}  // namespace primseg
