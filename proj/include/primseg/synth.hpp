#pragma once

#include "primseg/attributes.hpp"
#include "primseg/geometry.hpp"
#include "primseg/segmentation.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace primseg {

/// One ground-truth surface with its finite extent.
struct PrimitiveSpec {
  PrimitiveType type = PrimitiveType::Plane;
  Params params = Params::Zero();
  std::optional<Patch> patch;   ///< B-spline types
  Vec3d center = Vec3d::Zero();  ///< plane: patch center (projected onto the plane)
  double half_size = 0.1;        ///< plane: half the side of the square patch
  double t0 = 0, t1 = 0;         ///< cylinder: axial range from o; cone: distance range from the apex
  int points = 0;

  void validate() const;
};

struct SceneSpec {
  std::vector<PrimitiveSpec> primitives;
  double noise = 0;  ///< standard deviation of the Gaussian position noise
  double rho = 0;    ///< fraction of ground-truth attributes to corrupt
  std::uint64_t seed = 0;

  void validate() const;
  int total_points() const;
};

struct Scene {
  Cloud cloud;
  Segmentation gt;
  PointAttributes attrs;  ///< ground-truth attributes (corrupted when rho > 0)
};

/// Noise-free samples on the surface with exact unit normals. Area-uniform
/// for the analytic types, uniform in (u, v) for B-spline patches.
Cloud sample_surface(const PrimitiveSpec& p, int count, std::mt19937_64& rng);

/// Samples every primitive, adds noise, builds labels and attributes.
Scene generate_scene(const SceneSpec& spec);

/// Ground-truth attribute rows: descriptor = position, normal, one-hot type
/// and four zeros; one-hot type distribution; the generating parameters.
PointAttributes ground_truth_attributes(const Cloud& cloud, const Segmentation& gt);

/// Replaces a random floor(rho n) subset of rows by the type and parameters
/// of a random other segment.
PointAttributes corrupt_params(const PointAttributes& attrs, const Segmentation& gt, double rho, std::uint64_t seed);

struct RandomSceneOptions {
  int min_primitives = 4;
  int max_primitives = 8;
  int total_points = 2048;
  double noise = 0;
  double min_size = 0.2;
  double max_size = 0.6;
  /// Minimum clearance between bounding spheres of distinct primitives.
  double clearance = 0.1;
  /// Half-width of the cube holding the primitive centers.
  double box = 1.0;
  std::vector<PrimitiveType> types{PrimitiveType::Plane, PrimitiveType::Sphere, PrimitiveType::Cylinder,
                                   PrimitiveType::Cone};
};

/// Random non-overlapping scene of analytic primitives with equal point counts.
SceneSpec random_scene_spec(const RandomSceneOptions& opts, std::uint64_t seed);

/// Random smooth open patch: a perturbed planar 6x6 control grid.
Patch random_bspline_patch(const Vec3d& center, double size, std::mt19937_64& rng);

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

/// Segmentation JSON of the ground truth with the scene spec under "scene".
std::string ground_truth_json(const Scene& scene, const SceneSpec& spec);

/// The scene spec stored under "scene" in a ground-truth file, if any.
std::optional<SceneSpec> embedded_scene_spec(const std::string& gt_json);

}  // namespace primseg
