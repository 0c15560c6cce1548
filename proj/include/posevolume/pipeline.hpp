#pragma once

#include <optional>
#include <span>
#include <vector>

#include "posevolume/field.hpp"
#include "posevolume/geometry.hpp"
#include "posevolume/solver.hpp"
#include "posevolume/volume.hpp"

namespace posevolume {

enum class PoseSolver {
  /// Exhaustive soft RANSAC over all 3-subsets.
  SoftRansac,
  /// A single least-squares fit over every keypoint.
  KabschAll,
};

struct PipelineConfig {
  Vec3 coarse_half_range = Vec3::Constant(0.3);
  double coarse_cell = 0.01;
  double fine_cell = 0.005;
  /// Fine half range per axis = factor x model diameter.
  double fine_range_factor = 0.75;
  /// Heatmap sigma = factor x cell size, for the diagnostic targets.
  double sigma_factor = 2.0;
  /// Logit scale applied to each feature tap (full resolution, quarter
  /// resolution, ...) before the per-keypoint sum and softmax, per level.
  /// Stands in for the channel weighting a learned 3D network applies.
  std::vector<double> coarse_tap_gains{5.0, 5.0};
  std::vector<double> fine_tap_gains{5.0, 5.0};
  SolverParams solver;
  PoseSolver pose_solver = PoseSolver::SoftRansac;
  double alpha = 1.0;
  LossWeights betas;

  void validate() const;
};

/// Everything a level needs that does not depend on the grid.
struct SceneInputs {
  const ViewPair& pair;
  const ViewFeatures& ref;
  const ViewFeatures& query;
  /// Model keypoints, model frame; index i drives feature channel i.
  const std::vector<Vec3>& keypoints;
  double model_diameter = 0.0;
  double prior_depth = 0.8;
  /// Enables the loss diagnostics.
  std::optional<RigidTransform> ground_truth;
};

/// Centroid of the mask-positive (> 0.5) pixels unprojected at the prior
/// depth, in world coordinates. Throws EmptyMask.
Vec3 initial_guess(const FeatureMap& ref_mask, const CameraIntrinsics& k, double prior_depth,
                   const RigidTransform& ref_from_world = RigidTransform::identity());

struct LevelDiagnostics {
  std::optional<double> kl;
  std::optional<double> keypoint_loss;
  std::optional<double> pose_loss;
  /// Keypoints whose fields were no sharper than uniform.
  int low_confidence = 0;
};

struct LevelResult {
  GridSpec grid;
  std::vector<ExtractedKeypoint> keypoints;
  RigidTransform pose;
  LevelDiagnostics diagnostics;
};

/// Sums each keypoint's channels across every lifted map, each map scaled
/// by its tap gain, and normalizes with a softmax. Channel c of the volume
/// belongs to keypoint c % n_keypoints and to tap (c / n_keypoints) % taps.
std::vector<ScalarGrid> keypoint_fields(const GeometricVolume& volume, std::size_t n_keypoints,
                                        std::span<const double> tap_gains);

LevelResult run_level(const Vec3& center, double cell, const Vec3& half_range, const SceneInputs& in,
                      const PipelineConfig& cfg, std::span<const double> tap_gains);

struct CoarseToFineResult {
  Vec3 initial_guess = Vec3::Zero();
  LevelResult coarse;
  LevelResult fine;
  /// Joint loss over both levels when ground truth was supplied.
  std::optional<double> joint_loss;

  const RigidTransform& pose() const { return fine.pose; }
};

/// Coarse level around the mask-based initial guess, fine level around the
/// coarse pose applied to the model centroid (keypoint 0). Pass
/// center_override to bypass the mask-based guess.
CoarseToFineResult run_coarse_to_fine(const PipelineConfig& cfg, const SceneInputs& in,
                                      std::optional<Vec3> center_override = std::nullopt);

/// Half width, in pixels, of the 2D soft-argmax window. Wide enough to
/// cover a whole response, which keeps sub-pixel readout unbiased.
inline constexpr int kKeypoint2dHalfWindowPx = 18;

/// Sub-pixel peak of one channel via per-axis windowed soft-argmax.
Vec2 extract_keypoint_2d(const FeatureMap& map, int channel, int half_window = kKeypoint2dHalfWindowPx);

struct LateFusionResult {
  RigidTransform pose;
  /// Keypoint indices that triangulated successfully, with their world points.
  std::vector<int> indices;
  std::vector<Vec3> points;
};

/// Per-view 2D keypoints, midpoint triangulation, then the pose solver.
/// Keypoints with degenerate rays are dropped; fewer than 3 left throws TooFewPoints.
LateFusionResult run_late_fusion(const SceneInputs& in, const SolverParams& params = {});

/// Mean distance between estimated keypoints and the posed model keypoints.
double mean_keypoint_error(std::span<const Vec3> estimated, std::span<const int> indices,
                           const std::vector<Vec3>& model_keypoints, const RigidTransform& gt);

}  // namespace posevolume
