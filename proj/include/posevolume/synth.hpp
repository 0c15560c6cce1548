#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "posevolume/geometry.hpp"
#include "posevolume/metrics.hpp"
#include "posevolume/volume.hpp"

namespace posevolume {

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_keypoints = 9;
  double baseline_m = 0.168;
  double noise_px = 0.0;
  double outlier_rate = 0.0;
  double occlusion_fraction = 0.0;
  double prior_depth_m = 0.8;
  /// Uniform spread of the true object depth around prior_depth_m.
  double depth_jitter_m = 0.15;

  void validate() const;
};

/// Camera of the LineMOD-style benchmark (640 x 480).
CameraIntrinsics default_intrinsics();

/// Std of the per-keypoint Gaussian responses, in pixels of each map.
inline constexpr double kResponseSigmaPx = 3.0;
/// Radius used to splat projected model points into the object silhouette.
inline constexpr double kSilhouetteRadiusPx = 6.0;
/// Downsampling factor of the second feature tap.
inline constexpr int kCoarseTapFactor = 4;

std::vector<std::string> builtin_model_names();
/// "cube", "cylinder" or "ape"; throws InvalidArgument otherwise.
ModelPoints make_builtin_model(const std::string& name, int n_points = 2000);
/// Points of an ASCII or binary little-endian PLY file (vertex x, y, z).
std::vector<Vec3> load_ply_points(const std::string& path);

/// Centroid first, then farthest-point sampling seeded at the point farthest
/// from the centroid, with the centroid kept in the distance set.
std::vector<Vec3> select_keypoints(const ModelPoints& model, int n);

/// Axis-aligned occluder in reference-view pixel coordinates (inclusive).
struct OccluderRect {
  double u0 = 0.0;
  double v0 = 0.0;
  double u1 = -1.0;
  double v1 = -1.0;

  bool empty() const { return u1 < u0 || v1 < v0; }
  bool covers(double u, double v) const { return u >= u0 && u <= u1 && v >= v0 && v <= v1; }
};

struct Scene {
  std::uint64_t seed = 0;
  /// Object (model frame) to world. World coincides with the reference camera.
  RigidTransform object_pose;
  ViewPair pair;
  OccluderRect occluder;
  /// Fraction of model points hidden by the occluder or outside the reference image.
  double invisible_fraction = 0.0;
};

/// Samples a pose near the prior depth and a query camera displaced by
/// baseline_m and aimed at the object. Throws Unplaceable after 100 misses.
Scene generate_scene(const SynthConfig& cfg, const ModelPoints& model);

/// Fraction of model points whose reference projection is occluded or off-image.
double invisible_fraction(const Scene& scene, const ModelPoints& model);

/// Per-pixel occluder mask (1 = occluded) of the reference view.
std::vector<std::uint8_t> occluder_mask(const Scene& scene);

struct OracleFeatures {
  /// Full resolution tap followed by the quarter resolution tap.
  ViewFeatures ref;
  ViewFeatures query;
  /// Response centers actually rendered, per keypoint (full-resolution pixels).
  std::vector<Vec2> ref_centers;
  std::vector<Vec2> query_centers;
};

/// Stand-in for the learned extractor: one Gaussian response channel per
/// keypoint, jittered and occasionally relocated, gated by the occluder in
/// the reference view. The mask is the silhouette minus the occluder.
OracleFeatures oracle_features(const Scene& scene, const ModelPoints& model,
                               const std::vector<Vec3>& keypoints, const SynthConfig& cfg);

/// Derives an independent per-scene seed from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace posevolume
