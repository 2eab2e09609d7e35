#include "primseg/config.hpp"
#include "primseg/davis_kahan.hpp"
#include "primseg/io.hpp"
#include "primseg/metrics.hpp"
#include "primseg/parallel.hpp"
#include "primseg/segment.hpp"
#include "primseg/synth.hpp"
#include "primseg/tuning.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace primseg;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitPipeline = 2;

// Input and argument problems exit 1; failures inside the library exit 2.
struct InputError : std::runtime_error {
  InputError(const std::string& what, std::string stage) : std::runtime_error(what), stage(std::move(stage)) {}
  std::string stage;
};

void report(const std::string& stage, const std::string& what) {
  std::cerr << "primseg: [" << (stage.empty() ? "error" : stage) << "] " << what << '\n';
}

template <typename F>
auto load(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw InputError(e.what(), e.stage().empty() ? stage : e.stage());
  } catch (const std::exception& e) {
    throw InputError(e.what(), stage);
  }
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw InputError("no such file: " + path, "io");
}

Config load_config_file(const std::string& path) {
  if (path.empty()) return {};
  require_file(path);
  return load("config", [&] { return load_config(path); });
}

Cloud load_cloud(const std::string& path) {
  require_file(path);
  return load("io", [&] { return io::read_cloud(path); });
}

std::string strip_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0
             ? s.substr(0, s.size() - suffix.size())
             : s;
}

// ---------------------------------------------------------------------------

struct SegmentArgs {
  std::string input, attrs, config, output, labels_out;
};

int cmd_segment(const SegmentArgs& a) {
  const Config cfg = load_config_file(a.config);
  const Cloud cloud = load_cloud(a.input);
  std::optional<PointAttributes> attrs;
  if (!a.attrs.empty()) {
    require_file(a.attrs);
    attrs = load("attributes", [&] { return load_attributes(a.attrs, cloud.size()); });
  }
  const auto start = std::chrono::steady_clock::now();
  PipelineTrace trace;
  const Segmentation seg = segment(cloud, attrs, cfg.pipeline, &trace);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& w : trace.warnings) report("warning", w);
  io::write_text_atomic(a.output, segmentation_to_json(seg));
  if (!a.labels_out.empty()) io::write_text_atomic(a.labels_out, io::format_labels(seg.labels));
  std::cout << "n=" << seg.size() << " segments=" << seg.count() << " runtime=" << secs << "s\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& prefix) {
  require_file(spec_path);
  const SceneSpec spec = load("scene", [&] { return scene_spec_from_json(io::read_text(spec_path)); });
  const Scene scene = load("scene", [&] { return generate_scene(spec); });
  io::write_text_atomic(prefix + ".xyz", io::format_xyz(scene.cloud));
  io::write_text_atomic(prefix + ".labels", io::format_labels(scene.gt.labels));
  io::write_text_atomic(prefix + ".attrs", format_attributes(scene.attrs));
  io::write_text_atomic(prefix + ".gt.json", ground_truth_json(scene, spec));
  std::cout << "n=" << scene.cloud.size() << " primitives=" << spec.primitives.size() << '\n';
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& cloud_path,
             const std::string& report_path) {
  require_file(pred_path);
  require_file(gt_path);
  const Segmentation pred = load("eval", [&] { return segmentation_from_json(io::read_text(pred_path)); });
  const std::string gt_text = load("eval", [&] { return io::read_text(gt_path); });
  const Segmentation gt = load("eval", [&] { return segmentation_from_json(gt_text); });
  const std::optional<SceneSpec> scene = load("eval", [&] { return embedded_scene_spec(gt_text); });
  const Cloud cloud = load_cloud(cloud_path);
  if (pred.size() != gt.size() || cloud.size() != gt.size())
    throw InputError("point counts differ: pred " + std::to_string(pred.size()) + ", gt " + std::to_string(gt.size()) +
                         ", cloud " + std::to_string(cloud.size()),
                     "eval");
  const MetricsReport rep = evaluate(pred, gt, cloud, scene, {});
  io::write_text_atomic(report_path, metrics_to_json(rep));
  std::cout << metrics_table(rep);
  return 0;
}

struct DkArgs {
  int n = 0, k = 0, trials = 1;
  double rho = 0;
  std::uint64_t seed = 0;
  std::string csv;
};

int cmd_dk(const DkArgs& a) {
  if (a.n < 1 || a.k < 1 || a.trials < 1) throw InputError("n, k and trials must be positive", "dk");
  if (a.n % a.k != 0) throw InputError("K must divide n", "dk");
  if (!(a.rho >= 0 && a.rho < 1)) throw InputError("rho must lie in [0, 1)", "dk");
  const auto reports = dk_experiment(a.n, a.k, a.rho, a.trials, a.seed);
  io::write_text_atomic(a.csv, format_dk_csv(reports));
  int held = 0;
  for (const auto& r : reports) held += r.procrustes_error <= r.bound;
  std::cout << "trials=" << reports.size() << " within_bound=" << held << '\n';
  return 0;
}

struct TuneArgs {
  std::string scenes, config, out, trace;
  int max_iter = 30;
};

std::vector<ValidationScene> load_validation_scenes(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir, "io");
  std::vector<fs::path> gts;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 8 && strip_suffix(name, ".gt.json") != name) gts.push_back(e.path());
  }
  std::sort(gts.begin(), gts.end());
  if (gts.empty()) throw InputError("no *.gt.json scenes in " + dir, "tune");
  std::vector<ValidationScene> scenes;
  for (const auto& g : gts) {
    const std::string prefix = strip_suffix(g.string(), ".gt.json");
    ValidationScene s;
    s.cloud = load_cloud(prefix + ".xyz");
    s.labels = load("tune", [&] { return segmentation_from_json(io::read_text(g)).labels; });
    if (static_cast<Eigen::Index>(s.labels.size()) != s.cloud.size())
      throw InputError("label count of " + g.string() + " does not match its cloud", "tune");
    if (fs::is_regular_file(prefix + ".attrs"))
      s.attrs = load("attributes", [&] { return load_attributes(prefix + ".attrs", s.cloud.size()); });
    scenes.push_back(std::move(s));
  }
  return scenes;
}

int cmd_tune(const TuneArgs& a) {
  if (a.max_iter < 0) throw InputError("--max-iter must be nonnegative", "tune");
  const Config cfg = load_config_file(a.config);
  const auto scenes = load_validation_scenes(a.scenes);
  TuneOptions opts;
  opts.max_iter = a.max_iter;
  opts.seed = cfg.pipeline.seed;
  const auto objective = [&](const HyperParams& hp) {
    PipelineConfig p = cfg.pipeline;
    p.hp = hp;
    return validation_objective(scenes, p, cfg.loss);
  };
  const HyperTuneResult res = tune_hyperparams(objective, cfg.pipeline.hp, opts);
  if (res.run.stop_reason == "objective failure" && res.run.trace.size() == 1)
    throw Error("objective could not be evaluated at the initial configuration", "tune");
  Config tuned = cfg;
  if (res.run.iterations > 0) tuned.pipeline.hp = res.hp;
  const std::string trace = a.trace.empty() ? strip_suffix(a.out, ".json") + ".trace.csv" : a.trace;
  io::write_text_atomic(trace, format_trace_csv(res.run));
  io::write_text_atomic(a.out, config_to_json(tuned));
  std::cout << "iterations=" << res.run.iterations << " objective=" << res.run.trace.front().objective << " -> "
            << res.run.objective << " stop=\"" << res.run.stop_reason << "\"\n";
  return 0;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const InputError& e) {
    report(e.stage, e.what());
    return kExitInput;
  } catch (const Error& e) {
    report(e.stage().empty() ? "pipeline" : e.stage(), e.what());
    return kExitPipeline;
  } catch (const std::exception& e) {
    report("pipeline", e.what());
    return kExitPipeline;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primitive segmentation of 3D point clouds"};
  app.set_version_flag("--version", PRIMSEG_VERSION);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides PRIMSEG_THREADS)")->check(CLI::NonNegativeNumber);

  auto add_version = [](CLI::App* sub) { sub->set_version_flag("--version", PRIMSEG_VERSION); };

  SegmentArgs seg;
  auto* s = app.add_subcommand("segment", "Segment a point cloud into primitives");
  s->add_option("--input", seg.input, "Point cloud (.xyz or .ply)")->required();
  s->add_option("--attrs", seg.attrs, "Per-point attributes file");
  s->add_option("--config", seg.config, "Config JSON")->required();
  s->add_option("--output", seg.output, "Segmentation JSON")->required();
  s->add_option("--labels-out", seg.labels_out, "Label file, one integer per line");
  add_version(s);

  std::string spec, prefix;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic scene");
  sy->add_option("--spec", spec, "Scene spec JSON")->required();
  sy->add_option("--out-prefix", prefix, "Prefix of the output files")->required();
  add_version(sy);

  std::string pred, gt, cloud, report_path;
  auto* ev = app.add_subcommand("eval", "Score a segmentation against ground truth");
  ev->add_option("--pred", pred, "Predicted segmentation JSON")->required();
  ev->add_option("--gt", gt, "Ground-truth segmentation JSON")->required();
  ev->add_option("--cloud", cloud, "Point cloud (.xyz or .ply)")->required();
  ev->add_option("--report", report_path, "Metrics JSON")->required();
  add_version(ev);

  DkArgs dk;
  auto* d = app.add_subcommand("dk", "Spectral perturbation experiment on block matrices");
  d->add_option("--n", dk.n, "Points")->required();
  d->add_option("--k", dk.k, "Blocks")->required();
  d->add_option("--rho", dk.rho, "Corrupted fraction")->required();
  d->add_option("--trials", dk.trials, "Trials")->required();
  d->add_option("--seed", dk.seed, "Seed")->required();
  d->add_option("--csv", dk.csv, "Output CSV")->required();
  add_version(d);

  TuneArgs tn;
  auto* t = app.add_subcommand("tune", "Tune hyperparameters on ground-truth scenes");
  t->add_option("--scenes", tn.scenes, "Directory of <name>.xyz and <name>.gt.json pairs")->required();
  t->add_option("--config", tn.config, "Starting config JSON")->required();
  t->add_option("--out", tn.out, "Tuned config JSON")->required();
  t->add_option("--trace", tn.trace, "Iteration trace CSV (default <out>.trace.csv)");
  t->add_option("--max-iter", tn.max_iter, "Maximum iterations")->capture_default_str();
  add_version(t);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }
  if (threads > 0) set_num_threads(threads);

  if (s->parsed()) return guarded([&] { return cmd_segment(seg); });
  if (sy->parsed()) return guarded([&] { return cmd_synth(spec, prefix); });
  if (ev->parsed()) return guarded([&] { return cmd_eval(pred, gt, cloud, report_path); });
  if (d->parsed()) return guarded([&] { return cmd_dk(dk); });
  return guarded([&] { return cmd_tune(tn); });
}
