#include "oracles.hpp"

#include "primseg/config.hpp"
#include "primseg/davis_kahan.hpp"
#include "primseg/io.hpp"
#include "primseg/losses.hpp"
#include "primseg/metrics.hpp"
#include "primseg/segment.hpp"
#include "primseg/synth.hpp"
#include "primseg/tuning.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

using namespace primseg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(4) << x;
  return s.str();
}

// Params of an analytic primitive after x -> R x + t.
Params rigid_params(PrimitiveType type, const Params& s, const Eigen::Matrix3d& R, const Vec3d& t) {
  using namespace slot;
  switch (type) {
    case PrimitiveType::Plane: {
      const Vec3d n = R * s.segment<3>(plane_n);
      return plane_params<double>(n, s(plane_d) + n.dot(t));
    }
    case PrimitiveType::Sphere: return sphere_params<double>(R * s.segment<3>(sphere_o) + t, s(sphere_r));
    case PrimitiveType::Cylinder:
      return cylinder_params<double>(R * s.segment<3>(cyl_a), R * s.segment<3>(cyl_o) + t, s(cyl_r));
    default: return cone_params<double>(R * s.segment<3>(cone_o) + t, R * s.segment<3>(cone_a), s(cone_theta));
  }
}

constexpr PrimitiveType kAnalytic[] = {PrimitiveType::Plane, PrimitiveType::Sphere, PrimitiveType::Cylinder,
                                       PrimitiveType::Cone};

Outcome distance_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-2, 2);
  double on = 0, rigid = 0;
  for (PrimitiveType t : kAnalytic) {
    for (int i = 0; i < 1000; ++i) {
      const Params s = oracle::random_params(t, rng);
      const Vec3d p = oracle::point_on(t, s, rng);
      on = std::max(on, distance_point_primitive(p, t, s));
      const Vec3d q = p + Vec3d(u(rng), u(rng), u(rng));
      const Eigen::Matrix3d R = oracle::random_rotation(rng);
      const Vec3d shift(u(rng), u(rng), u(rng));
      const double d0 = distance_point_primitive(q, t, s);
      const double d1 = distance_point_primitive<double>(R * q + shift, t, rigid_params(t, s, R, shift));
      rigid = std::max(rigid, std::abs(d0 - d1));
    }
  }
  const double secs = seconds_since(t0);
  return {on <= 1e-9 && rigid <= 1e-9 && secs < 1.0,
          "max on-surface " + fmt(on) + ", max rigid change " + fmt(rigid) + ", " + fmt(secs) + " s"};
}

Outcome eigensolver_oracle() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> g;
  EigsOptions opts;
  opts.dense_threshold = 0;
  double worst_value = 0, worst_vector = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd B(100, 100);
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = g(rng);
    const Eigen::MatrixXd A = 0.5 * (B + B.transpose());
    opts.seed = static_cast<std::uint64_t>(trial);
    const EigenPairs got = top_eigenpairs(A, 5, opts);
    const auto [vals, vecs] = oracle::jacobi_eigen(A);
    for (int j = 0; j < 5; ++j) {
      worst_value = std::max(worst_value, std::abs(got.values(j) - vals(j)));
      const Eigen::VectorXd a = got.vectors.col(j), b = vecs.col(j);
      worst_vector = std::max(worst_vector, std::min((a - b).norm(), (a + b).norm()));
    }
  }
  return {worst_value <= 1e-8 && worst_vector <= 1e-8,
          "max eigenvalue error " + fmt(worst_value) + ", max eigenvector error " + fmt(worst_vector)};
}

Outcome davis_kahan_bound() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> pickK(2, 6), pickm(20, 800);
  std::uniform_real_distribution<double> pickrho(0.0, 0.3);
  int held = 0, total = 0;
  double worst_ratio = 0;
  for (int inst = 0; inst < 500; ++inst) {
    const int K = pickK(rng);
    const int n = std::max(K, pickm(rng) / K * K);
    const double rho = inst % 25 == 0 ? 0.0 : pickrho(rng);
    const Eigen::MatrixXd Ag = block_consistency_matrix(n, K);
    const Eigen::MatrixXd A = corrupt_block_matrix(Ag, K, rho, 1000 + static_cast<std::uint64_t>(inst));
    const DKReport r = dk_compare(Ag, A, K);
    if (!(r.eigengap > 0)) continue;
    ++total;
    if (r.procrustes_error <= r.bound) ++held;
    if (r.bound > 0) worst_ratio = std::max(worst_ratio, r.procrustes_error / r.bound);
  }
  const double secs = seconds_since(t0);
  return {total >= 500 && held == total && secs < 120,
          std::to_string(held) + "/" + std::to_string(total) + " within bound, max error/bound " + fmt(worst_ratio) +
              ", " + fmt(secs) + " s"};
}

Outcome davis_kahan_scaling() {
  const auto t0 = Clock::now();
  std::vector<double> med;
  for (int n : {200, 800, 3200}) {
    std::vector<double> rel;
    for (const DKReport& r : dk_experiment(n, 4, 0.2, 20, 404)) rel.push_back(r.relative_error);
    med.push_back(median(rel));
  }
  const double secs = seconds_since(t0);
  const bool monotone = med[1] <= med[0] && med[2] <= med[1];
  return {monotone && med[2] < std::sqrt(0.2) && secs < 300,
          "median relative error " + fmt(med[0]) + ", " + fmt(med[1]) + ", " + fmt(med[2]) + " vs sqrt(rho) " +
              fmt(std::sqrt(0.2)) + ", " + fmt(secs) + " s"};
}

Outcome loss_gradient() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> pickn(2, 50), pickm(1, 6), pickK(1, 5);
  std::normal_distribution<double> g;
  const double h = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = pickn(rng), m = pickm(rng), K = std::min(n, pickK(rng));
    std::uniform_int_distribution<int> pick(0, K - 1);
    Eigen::MatrixXd d(n, m);
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      labels[static_cast<size_t>(i)] = i < K ? i : pick(rng);
      for (int j = 0; j < m; ++j) d(i, j) = g(rng) + 0.5 * labels[static_cast<size_t>(i)];
    }
    const Eigen::MatrixXd grad = embedding_loss(d, labels).gradient;
    Eigen::MatrixXd fd(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        Eigen::MatrixXd p = d, q = d;
        p(i, j) += h;
        q(i, j) -= h;
        fd(i, j) = (embedding_loss(p, labels).value - embedding_loss(q, labels).value) / (2 * h);
      }
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
    worst = std::max(worst, (grad - fd).cwiseAbs().maxCoeff() / scale);
  }
  return {worst < 1e-5, "max relative error " + fmt(worst)};
}

Outcome entropy_weighting() {
  int wins = 0;
  double worst_norm = 0;
  const int n = 500;
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(600 + static_cast<std::uint64_t>(trial));
    std::normal_distribution<double> tight(0, 0.05);
    std::uniform_real_distribution<double> flat(-std::sqrt(3.0), std::sqrt(3.0));
    Eigen::MatrixXd clustered(n, 1), noise(n, 1);
    for (int i = 0; i < n; ++i) {
      clustered(i, 0) = (i % 2 ? 1.0 : -1.0) + tight(rng);
      noise(i, 0) = flat(rng);
    }
    FeatureBundle b;
    b.features.push_back({clustered, FeatureRole::Consistency, 0.1 * feature_spread(clustered)});
    b.features.push_back({noise, FeatureRole::Consistency, 0.1 * feature_spread(noise)});
    const WeightVector w = compute_weights(b);
    if (w.w(0) > w.w(1)) ++wins;
    worst_norm = std::max(worst_norm, std::abs(w.w.squaredNorm() - 1.0));
  }
  return {wins >= 99 && worst_norm <= 1e-9,
          std::to_string(wins) + "/100 clustered wins, max |sum w^2 - 1| " + fmt(worst_norm)};
}

struct SceneScores {
  double seg = 0, type = 0, secs = 0;
};

SceneScores synthetic_scenes(double noise, std::uint64_t seed0) {
  const auto t0 = Clock::now();
  SceneScores s;
  for (int i = 0; i < 50; ++i) {
    RandomSceneOptions o;
    o.noise = noise;
    SceneSpec spec = random_scene_spec(o, seed0 + static_cast<std::uint64_t>(i));
    const Scene scene = generate_scene(spec);
    PipelineConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(i);
    const Segmentation pred = segment(scene.cloud, std::nullopt, cfg);
    const std::vector<int> a = match_segments(pred, scene.gt);
    s.seg += seg_iou(pred, scene.gt, a) / 50;
    s.type += type_iou(pred, scene.gt, a) / 50;
  }
  s.secs = seconds_since(t0);
  return s;
}

Outcome end_to_end() {
  const SceneScores clean = synthetic_scenes(0.0, 7000);
  const SceneScores noisy = synthetic_scenes(0.005, 8000);
  const double secs = clean.secs + noisy.secs;
  return {clean.seg >= 0.95 && clean.type >= 0.95 && noisy.seg >= 0.85 && secs < 600,
          "noise-free Seg-IoU " + fmt(clean.seg) + " Type-IoU " + fmt(clean.type) + ", noisy Seg-IoU " +
              fmt(noisy.seg) + " Type-IoU " + fmt(noisy.type) + ", " + fmt(secs) + " s"};
}

// Closed-form distances written independently of the library.
double oracle_distance(const Vec3d& p, const Primitive& q) {
  using namespace slot;
  const Params& s = q.params;
  switch (q.type) {
    case PrimitiveType::Plane: return std::abs(p.dot(s.segment<3>(plane_n)) - s(plane_d));
    case PrimitiveType::Sphere: return std::abs((p - s.segment<3>(sphere_o)).norm() - s(sphere_r));
    case PrimitiveType::Cylinder:
      return std::abs(s.segment<3>(cyl_a).cross(p - s.segment<3>(cyl_o)).norm() - s(cyl_r));
    default: {
      const Vec3d v = p - s.segment<3>(cone_o), a = s.segment<3>(cone_a);
      const double h = a.dot(v), r = (v - h * a).norm(), th = s(cone_theta);
      return std::abs(h * std::sin(th) - r * std::cos(th));
    }
  }
}

Outcome metrics_oracle() {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> pickK(1, 6), pickn(6, 60);
  int seg_agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = pickn(rng), kg = std::min(n, pickK(rng)), kp = std::min(n, pickK(rng));
    auto labels = [&](int K) {
      std::uniform_int_distribution<int> pick(0, K - 1);
      std::vector<int> l(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) l[static_cast<size_t>(i)] = i < K ? i : pick(rng);
      std::shuffle(l.begin(), l.end(), rng);
      return segmentation_from_labels(canonical_labels(l));
    };
    const Segmentation g = labels(kg), p = labels(kp);
    // IoU table computed directly from the label arrays.
    Eigen::MatrixXd iou = Eigen::MatrixXd::Zero(kg, kp);
    for (int a = 0; a < kg; ++a)
      for (int b = 0; b < kp; ++b) {
        int inter = 0, uni = 0;
        for (int i = 0; i < n; ++i) {
          const bool x = g.labels[static_cast<size_t>(i)] == a, y = p.labels[static_cast<size_t>(i)] == b;
          inter += x && y;
          uni += x || y;
        }
        iou(a, b) = double(inter) / uni;
      }
    const double want = oracle::exhaustive_max_assignment(iou) / kg;
    if (std::abs(seg_iou(p, g) - want) <= 1e-12) ++seg_agree;
  }

  int cov_agree = 0;
  const int cov_trials = 50;
  std::uniform_real_distribution<double> u(-1, 1), jitter(0, 0.03);
  for (int trial = 0; trial < cov_trials; ++trial) {
    std::vector<Primitive> prims;
    for (PrimitiveType t : kAnalytic) prims.push_back({t, oracle::random_params(t, rng), std::nullopt});
    Points<double> pts(200, 3);
    for (int i = 0; i < 200; ++i) {
      const Primitive& q = prims[static_cast<size_t>(i % 4)];
      pts.row(i) = (oracle::point_on(q.type, q.params, rng) + jitter(rng) * oracle::random_unit(rng)).transpose();
    }
    int covered = 0;
    for (int i = 0; i < 200; ++i) {
      bool hit = false;
      for (const auto& q : prims) hit = hit || oracle_distance(pts.row(i).transpose(), q) < 0.01;
      covered += hit;
    }
    if (p_coverage(pts, prims, 0.01) == covered / 200.0) ++cov_agree;
  }
  return {seg_agree == 200 && cov_agree == cov_trials,
          "seg_iou " + std::to_string(seg_agree) + "/200, p_coverage " + std::to_string(cov_agree) + "/" +
              std::to_string(cov_trials)};
}

// Median U_s row distance of cross-crease kNN pairs over within-plane pairs
// on two unit squares meeting at 90 degrees.
double crease_ratio(std::uint64_t seed, bool exact_normals) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Points<double> P(1000, 3), N(1000, 3);
  std::vector<int> side(1000);
  for (int i = 0; i < 1000; ++i) {
    side[static_cast<size_t>(i)] = i % 2;
    if (i % 2 == 0) {
      P.row(i) << u(rng), u(rng), 0.0;
      N.row(i) << 0, 0, 1;
    } else {
      P.row(i) << 0.0, u(rng), u(rng);
      N.row(i) << 1, 0, 0;
    }
  }
  PipelineConfig cfg;
  cfg.k = 50;
  const FeatureStage st = build_features(exact_normals ? Cloud(P, N) : Cloud(P), std::nullopt, cfg);
  const Eigen::MatrixXd& Us = st.smoothness.features;
  const NeighborGraph graph = knn_graph(st.cloud, 50);
  std::vector<double> across, within;
  for (Eigen::Index r = 0; r < graph.size(); ++r)
    for (int c = 0; c < graph.k; ++c) {
      const int j = graph.indices(r, c);
      const double d = (Us.row(r) - Us.row(j)).norm();
      const int a = side[static_cast<size_t>(st.working[static_cast<size_t>(r)])];
      const int b = side[static_cast<size_t>(st.working[static_cast<size_t>(j)])];
      (a == b ? within : across).push_back(d);
    }
  return median(across) / median(within);
}

Outcome crease_separation() {
  std::vector<double> exact, estimated;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    exact.push_back(crease_ratio(seed, true));
    estimated.push_back(crease_ratio(seed, false));
  }
  const double worst = *std::min_element(exact.begin(), exact.end());
  return {worst >= 2.0, "across/within over 10 dihedrals with exact normals: min " + fmt(worst) + ", median " +
                            fmt(median(exact)) + "; with estimated normals: median " + fmt(median(estimated))};
}

Outcome tuner_contract() {
  const auto t0 = Clock::now();
  std::vector<ValidationScene> scenes;
  for (std::uint64_t seed : {11, 12, 13}) {
    RandomSceneOptions o;
    o.min_primitives = 3;
    o.max_primitives = 4;
    o.total_points = 400;
    const Scene scene = generate_scene(random_scene_spec(o, seed));
    scenes.push_back({scene.cloud, scene.gt.labels, scene.attrs});
  }
  const PipelineConfig cfg;
  const auto objective = [&](const HyperParams& hp) {
    PipelineConfig p = cfg;
    p.hp = hp;
    return validation_objective(scenes, p);
  };
  const HyperTuneResult res = tune_hyperparams(objective, cfg.hp);
  bool monotone = true;
  for (size_t i = 1; i < res.run.trace.size(); ++i)
    monotone = monotone && res.run.trace[i].objective <= res.run.trace[i - 1].objective;
  const bool stopped = res.run.stop_reason == "step size" || res.run.stop_reason == "line search";
  return {res.run.iterations <= 30 && monotone && stopped && res.run.last_step < 1e-3,
          std::to_string(res.run.iterations) + " iterations, objective " + fmt(res.run.trace.front().objective) +
              " -> " + fmt(res.run.objective) + ", final step " + fmt(res.run.last_step) + ", stop \"" +
              res.run.stop_reason + "\", " + fmt(seconds_since(t0)) + " s"};
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(PRIMSEG_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  oracle::TempDir dir("acceptance");
  RandomSceneOptions o;
  o.min_primitives = o.max_primitives = 5;
  const auto spec = dir.write("spec.json", scene_spec_to_json(random_scene_spec(o, 31)));
  const auto cfg = dir.write("config.json", R"({"pipeline": {"seed": 5}})");
  std::vector<std::string> runs[2];
  for (int r = 0; r < 2; ++r) {
    const std::string tag = "run" + std::to_string(r);
    const std::string prefix = dir.file(tag).string();
    if (run_cli("synth --spec " + spec.string() + " --out-prefix " + prefix, dir.file(tag + ".log")) != 0)
      return {false, "synth failed"};
    const std::string out = prefix + ".seg.json", labels = prefix + ".seg.labels";
    if (run_cli("segment --input " + prefix + ".xyz --config " + cfg.string() + " --output " + out +
                    " --labels-out " + labels,
                dir.file(tag + ".log")) != 0)
      return {false, "segment failed"};
    for (const char* ext : {".xyz", ".labels", ".attrs", ".gt.json", ".seg.json", ".seg.labels"})
      runs[r].push_back(io::read_text(prefix + ext));
  }
  int same = 0;
  for (size_t i = 0; i < runs[0].size(); ++i) same += runs[0][i] == runs[1][i];
  return {same == static_cast<int>(runs[0].size()),
          std::to_string(same) + "/" + std::to_string(runs[0].size()) + " output files identical"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"distance exactness", distance_exactness},
      {"eigensolver oracle", eigensolver_oracle},
      {"Davis-Kahan bound", davis_kahan_bound},
      {"Davis-Kahan scaling", davis_kahan_scaling},
      {"embedding loss gradient", loss_gradient},
      {"entropy weighting", entropy_weighting},
      {"end-to-end segmentation", end_to_end},
      {"metrics oracle", metrics_oracle},
      {"crease separation", crease_separation},
      {"tuner contract", tuner_contract},
      {"determinism", determinism},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
