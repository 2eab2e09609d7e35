#include "primseg/synth.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace primseg {

using nlohmann::json;

namespace {

Vec3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3d v;
  do {
    v = Vec3d(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

void basis_of(const Vec3d& a, Vec3d& b1, Vec3d& b2) {
  b1 = any_orthogonal(a);
  b2 = a.cross(b1);
}

/// Center and radius of a sphere enclosing the finite primitive.
std::pair<Vec3d, double> bounding_sphere(const PrimitiveSpec& p) {
  const Params& s = p.params;
  switch (p.type) {
    case PrimitiveType::Plane: return {p.center, p.half_size * std::sqrt(2.0)};
    case PrimitiveType::Sphere: return {s.segment<3>(slot::sphere_o), s(slot::sphere_r)};
    case PrimitiveType::Cylinder: {
      const Vec3d a = s.segment<3>(slot::cyl_a);
      const double half = 0.5 * (p.t1 - p.t0);
      return {s.segment<3>(slot::cyl_o) + a * 0.5 * (p.t0 + p.t1), std::hypot(half, s(slot::cyl_r))};
    }
    case PrimitiveType::Cone: {
      const Vec3d a = s.segment<3>(slot::cone_a);
      const double half = 0.5 * (p.t1 - p.t0);
      return {s.segment<3>(slot::cone_o) + a * 0.5 * (p.t0 + p.t1),
              std::hypot(half, p.t1 * std::tan(s(slot::cone_theta)))};
    }
    default: {
      const auto& c = p.patch->control();
      const Vec3d mid = c.colwise().mean().transpose();
      return {mid, (c.rowwise() - mid.transpose()).rowwise().norm().maxCoeff()};
    }
  }
}

}  // namespace

void PrimitiveSpec::validate() const {
  if (points < 1) throw Error("primitive needs at least one point", "scene");
  if (!is_analytic(type)) {
    if (!patch) throw Error("B-spline primitive needs a control patch", "scene");
    if (patch->closed_u() != (type == PrimitiveType::BSplineClosed))
      throw Error("B-spline patch closure does not match its type", "scene");
    return;
  }
  if (!params_valid(type, params)) throw Error("invalid parameters for " + std::string(type_name(type)), "scene");
  switch (type) {
    case PrimitiveType::Plane:
      if (!(half_size > 0)) throw Error("plane half_size must be positive", "scene");
      break;
    case PrimitiveType::Cylinder:
      if (!(t1 > t0)) throw Error("cylinder range must satisfy t0 < t1", "scene");
      break;
    case PrimitiveType::Cone:
      if (!(t0 >= 0 && t1 > t0)) throw Error("cone range must satisfy 0 <= t0 < t1", "scene");
      break;
    default:
      break;
  }
}

void SceneSpec::validate() const {
  if (primitives.empty()) throw Error("scene needs at least one primitive", "scene");
  if (!(noise >= 0)) throw Error("noise must be nonnegative", "scene");
  if (!(rho >= 0 && rho < 1)) throw Error("rho must lie in [0, 1)", "scene");
  for (const auto& p : primitives) p.validate();
}

int SceneSpec::total_points() const {
  int n = 0;
  for (const auto& p : primitives) n += p.points;
  return n;
}

Cloud sample_surface(const PrimitiveSpec& p, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Points<double> pts(count, 3), nrm(count, 3);
  const Params& s = p.params;
  for (int i = 0; i < count; ++i) {
    Vec3d x, n;
    switch (p.type) {
      case PrimitiveType::Plane: {
        n = s.segment<3>(slot::plane_n);
        Vec3d b1, b2;
        basis_of(n, b1, b2);
        const Vec3d c = p.center - n * (n.dot(p.center) - s(slot::plane_d));
        x = c + b1 * p.half_size * (2 * U(rng) - 1) + b2 * p.half_size * (2 * U(rng) - 1);
        break;
      }
      case PrimitiveType::Sphere: {
        n = random_unit(rng);
        x = s.segment<3>(slot::sphere_o) + s(slot::sphere_r) * n;
        break;
      }
      case PrimitiveType::Cylinder: {
        const Vec3d a = s.segment<3>(slot::cyl_a);
        Vec3d b1, b2;
        basis_of(a, b1, b2);
        const double phi = 2 * M_PI * U(rng), t = p.t0 + (p.t1 - p.t0) * U(rng);
        n = std::cos(phi) * b1 + std::sin(phi) * b2;
        x = s.segment<3>(slot::cyl_o) + t * a + s(slot::cyl_r) * n;
        break;
      }
      case PrimitiveType::Cone: {
        const Vec3d a = s.segment<3>(slot::cone_a);
        const double th = s(slot::cone_theta);
        Vec3d b1, b2;
        basis_of(a, b1, b2);
        // Lateral area grows linearly with the distance h from the apex.
        const double h = std::sqrt(p.t0 * p.t0 + (p.t1 * p.t1 - p.t0 * p.t0) * U(rng));
        const double phi = 2 * M_PI * U(rng);
        const Vec3d u = std::cos(phi) * b1 + std::sin(phi) * b2;
        x = s.segment<3>(slot::cone_o) + h * a + h * std::tan(th) * u;
        n = std::cos(th) * u - std::sin(th) * a;
        break;
      }
      default: {
        const auto sm = p.patch->eval_with_derivatives(U(rng), U(rng));
        x = sm.point;
        n = sm.du.cross(sm.dv);
        if (n.norm() < 1e-12) n = Vec3d::UnitZ();
        n.normalize();
        break;
      }
    }
    pts.row(i) = x.transpose();
    nrm.row(i) = n.transpose();
  }
  return Cloud(std::move(pts), std::move(nrm));
}

PointAttributes ground_truth_attributes(const Cloud& cloud, const Segmentation& gt) {
  const Eigen::Index n = cloud.size();
  PointAttributes a = PointAttributes::zeros(n, kDescriptorDim);
  a.type_dist.setZero();
  a.confidence.setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    const SegmentInfo& seg = gt.segments[static_cast<size_t>(gt.labels[static_cast<size_t>(i)])];
    const int t = type_code(seg.type);
    a.descriptors.block<1, 3>(i, 0) = cloud.positions().row(i);
    if (cloud.has_normals()) a.descriptors.block<1, 3>(i, 3) = cloud.normals().row(i);
    a.descriptors(i, 6 + t) = 1.0;
    a.type_dist(i, t) = 1.0;
    if (seg.params) a.params.row(i) = seg.params->transpose();
  }
  return a;
}

PointAttributes corrupt_params(const PointAttributes& attrs, const Segmentation& gt, double rho, std::uint64_t seed) {
  if (!(rho >= 0 && rho < 1)) throw Error("rho must lie in [0, 1)", "scene");
  PointAttributes out = attrs;
  const Eigen::Index n = attrs.size();
  const auto corrupted = static_cast<Eigen::Index>(std::floor(rho * double(n)));
  if (corrupted == 0 || gt.count() < 2) return out;
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> other(0, gt.count() - 2);
  for (Eigen::Index c = 0; c < corrupted; ++c) {
    const int i = order[static_cast<size_t>(c)];
    const int own = gt.labels[static_cast<size_t>(i)];
    int k = other(rng);
    if (k >= own) ++k;
    const SegmentInfo& seg = gt.segments[static_cast<size_t>(k)];
    out.type_dist.row(i).setZero();
    out.type_dist(i, type_code(seg.type)) = 1.0;
    const Params q = seg.params ? Params(*seg.params) : Params::Zero();
    out.params.row(i) = q.transpose();
  }
  return out;
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int n = spec.total_points();
  Points<double> pts(n, 3), nrm(n, 3);
  std::vector<int> labels(static_cast<size_t>(n));
  Segmentation gt;
  int at = 0;
  for (size_t k = 0; k < spec.primitives.size(); ++k) {
    const PrimitiveSpec& p = spec.primitives[k];
    const Cloud c = sample_surface(p, p.points, rng);
    pts.middleRows(at, p.points) = c.positions();
    nrm.middleRows(at, p.points) = c.normals();
    std::fill(labels.begin() + at, labels.begin() + at + p.points, static_cast<int>(k));
    SegmentInfo info;
    info.type = p.type;
    info.size = p.points;
    if (is_analytic(p.type)) info.params = p.params;
    else info.patch = p.patch;
    gt.segments.push_back(std::move(info));
    at += p.points;
  }
  if (spec.noise > 0) {
    std::normal_distribution<double> g(0.0, spec.noise);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d) pts(i, d) += g(rng);
  }
  gt.labels = std::move(labels);
  Scene scene{Cloud(std::move(pts), std::move(nrm)), std::move(gt), {}};
  scene.attrs = ground_truth_attributes(scene.cloud, scene.gt);
  if (spec.rho > 0) scene.attrs = corrupt_params(scene.attrs, scene.gt, spec.rho, spec.seed ^ 0xc0ffeeULL);
  return scene;
}

Patch random_bspline_patch(const Vec3d& center, double size, std::mt19937_64& rng) {
  constexpr int g = 6;
  std::normal_distribution<double> bump(0.0, 0.08 * size);
  const Vec3d n = random_unit(rng);
  Vec3d b1, b2;
  basis_of(n, b1, b2);
  Points<double> c(g * g, 3);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      const double u = (double(i) / (g - 1) - 0.5) * size, v = (double(j) / (g - 1) - 0.5) * size;
      c.row(i * g + j) = (center + u * b1 + v * b2 + bump(rng) * n).transpose();
    }
  return Patch(g, g, std::move(c), false);
}

SceneSpec random_scene_spec(const RandomSceneOptions& opts, std::uint64_t seed) {
  if (opts.min_primitives < 1 || opts.max_primitives < opts.min_primitives || opts.types.empty())
    throw Error("invalid random scene options", "scene");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int count = opts.min_primitives + static_cast<int>(std::floor(U(rng) * (opts.max_primitives - opts.min_primitives + 1)));
  SceneSpec spec;
  spec.seed = seed;
  spec.noise = opts.noise;
  std::vector<std::pair<Vec3d, double>> placed;
  for (int k = 0; k < count; ++k) {
    const PrimitiveType type = opts.types[static_cast<size_t>(U(rng) * double(opts.types.size())) % opts.types.size()];
    PrimitiveSpec p;
    p.type = type;
    p.points = opts.total_points / count + (k < opts.total_points % count ? 1 : 0);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw Error("could not place primitives without overlap", "scene");
      const double size = opts.min_size + (opts.max_size - opts.min_size) * U(rng);
      const Vec3d center(opts.box * (2 * U(rng) - 1), opts.box * (2 * U(rng) - 1), opts.box * (2 * U(rng) - 1));
      const Vec3d axis = random_unit(rng);
      switch (type) {
        case PrimitiveType::Plane:
          p.params = plane_params(axis, axis.dot(center));
          p.center = center;
          p.half_size = 0.5 * size;
          break;
        case PrimitiveType::Sphere:
          p.params = sphere_params(center, 0.5 * size);
          break;
        case PrimitiveType::Cylinder: {
          const double r = size * (0.2 + 0.2 * U(rng));
          p.t0 = -0.5 * size;
          p.t1 = 0.5 * size;
          p.params = cylinder_params(axis, center, r);
          break;
        }
        case PrimitiveType::Cone: {
          const double theta = (20.0 + 25.0 * U(rng)) * M_PI / 180.0;
          p.t0 = 0.3 * size;
          p.t1 = size;
          p.params = cone_params(Vec3d(center - axis * 0.65 * size), axis, theta);
          break;
        }
        default: {
          p.patch = random_bspline_patch(center, size, rng);
          break;
        }
      }
      const auto [c, r] = bounding_sphere(p);
      const bool clear = std::all_of(placed.begin(), placed.end(), [&](const auto& q) {
        return (q.first - c).norm() >= q.second + r + opts.clearance;
      });
      if (clear) {
        placed.emplace_back(c, r);
        break;
      }
    }
    spec.primitives.push_back(std::move(p));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json patch_json(const Patch& p) {
  json control = json::array();
  for (Eigen::Index i = 0; i < p.control().rows(); ++i)
    control.push_back({p.control()(i, 0), p.control()(i, 1), p.control()(i, 2)});
  return {{"rows", p.rows()}, {"cols", p.cols()}, {"closed_u", p.closed_u()}, {"control", control}};
}

Patch patch_from(const json& j) {
  const auto& control = j.at("control");
  Points<double> c(static_cast<Eigen::Index>(control.size()), 3);
  for (size_t i = 0; i < control.size(); ++i)
    for (size_t d = 0; d < 3; ++d) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = control.at(i).at(d).get<double>();
  return Patch(j.at("rows").get<int>(), j.at("cols").get<int>(), std::move(c), j.at("closed_u").get<bool>());
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw Error("unknown key '" + key + "' in " + where, "scene");
  }
}

json spec_json(const SceneSpec& spec) {
  json prims = json::array();
  for (const auto& p : spec.primitives) {
    json e;
    e["type"] = std::string(type_name(p.type));
    e["points"] = p.points;
    if (is_analytic(p.type)) e["params"] = vec_json(p.params);
    if (p.patch) e["patch"] = patch_json(*p.patch);
    if (p.type == PrimitiveType::Plane) {
      e["center"] = vec_json(p.center);
      e["half_size"] = p.half_size;
    }
    if (p.type == PrimitiveType::Cylinder || p.type == PrimitiveType::Cone) {
      e["t0"] = p.t0;
      e["t1"] = p.t1;
    }
    prims.push_back(std::move(e));
  }
  return {{"seed", spec.seed}, {"noise", spec.noise}, {"rho", spec.rho}, {"primitives", prims}};
}

SceneSpec spec_from(const json& j) {
  reject_unknown(j, {"seed", "noise", "rho", "primitives"}, "scene spec");
  SceneSpec spec;
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.noise = j.value("noise", 0.0);
  spec.rho = j.value("rho", 0.0);
  for (const auto& e : j.at("primitives")) {
    reject_unknown(e, {"type", "points", "params", "patch", "center", "half_size", "t0", "t1"}, "primitive");
    PrimitiveSpec p;
    p.type = type_from_name(e.at("type").get<std::string>());
    p.points = e.at("points").get<int>();
    if (e.contains("params")) {
      const auto v = e.at("params").get<std::vector<double>>();
      if (v.size() == static_cast<size_t>(kParamDim)) {
        p.params = Eigen::Map<const Params>(v.data());
      } else if (is_analytic(p.type) && v.size() == static_cast<size_t>(slot::block(p.type).second)) {
        p.params.setZero();
        const auto [first, width] = slot::block(p.type);
        p.params.segment(first, width) = Eigen::Map<const Eigen::VectorXd>(v.data(), width);
      } else {
        throw Error("primitive params must have 22 entries or the type's own block", "scene");
      }
    } else if (is_analytic(p.type)) {
      throw Error("analytic primitive needs params", "scene");
    }
    if (e.contains("patch")) p.patch = patch_from(e.at("patch"));
    if (e.contains("center")) {
      const auto v = e.at("center").get<std::vector<double>>();
      if (v.size() != 3) throw Error("center must have 3 entries", "scene");
      p.center = Vec3d(v[0], v[1], v[2]);
    }
    p.half_size = e.value("half_size", p.half_size);
    p.t0 = e.value("t0", 0.0);
    p.t1 = e.value("t1", 0.0);
    spec.primitives.push_back(std::move(p));
  }
  spec.validate();
  return spec;
}

}  // namespace

std::string scene_spec_to_json(const SceneSpec& spec) { return spec_json(spec).dump(2) + "\n"; }

SceneSpec scene_spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& ex) {
    throw Error(std::string("malformed scene spec: ") + ex.what(), "scene");
  }
}

std::string ground_truth_json(const Scene& scene, const SceneSpec& spec) {
  json j = json::parse(segmentation_to_json(scene.gt));
  j["scene"] = spec_json(spec);
  return j.dump(2) + "\n";
}

std::optional<SceneSpec> embedded_scene_spec(const std::string& gt_json) {
  try {
    const json j = json::parse(gt_json);
    if (!j.contains("scene")) return std::nullopt;
    return spec_from(j.at("scene"));
  } catch (const json::exception& ex) {
    throw Error(std::string("malformed ground truth: ") + ex.what(), "scene");
  }
}

}  // namespace primseg
