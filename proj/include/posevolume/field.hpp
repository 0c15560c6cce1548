#pragma once

#include <span>
#include <vector>

#include "posevolume/geometry.hpp"
#include "posevolume/volume.hpp"

namespace posevolume {

/// One scalar value per cell, laid out like GridSpec::linear_index.
struct ScalarGrid {
  GridSpec spec;
  std::vector<double> values;

  double sum() const;
};

/// Gaussian keypoint heatmaps centered at the posed model keypoints.
struct TargetHeatmaps {
  std::vector<Vec3> keypoints;
  RigidTransform pose;
  std::vector<double> sigmas;

  /// Uniform sigma for every keypoint.
  static TargetHeatmaps with_uniform_sigma(std::vector<Vec3> keypoints, RigidTransform pose,
                                           double sigma);
  void validate() const;
};

/// Normalized heatmap of keypoint i on the grid; throws KeypointOutsideGrid
/// when the posed keypoint falls outside the grid.
ScalarGrid rasterize_heatmap(const TargetHeatmaps& target, const GridSpec& spec, std::size_t i);

/// Softmax over every cell.
ScalarGrid normalize_field(const ScalarGrid& raw);

/// Floor applied to the target distribution before taking its logarithm,
/// capped at the field value of the same cell.
inline constexpr double kKlTargetFloor = 1e-12;

/// sum_p field(p) * log(field(p) / target(p)) with 0 log 0 = 0.
double kl_divergence(const ScalarGrid& field, const ScalarGrid& target);

struct ExtractedKeypoint {
  Vec3 position = Vec3::Zero();
  /// Product of the three marginal maxima.
  double confidence = 0.0;
  /// True when the field carries no more information than a uniform one.
  bool low_confidence = false;
};

/// Half width, in cells, of the soft-argmax window used on each marginal.
inline constexpr int kSoftArgmaxHalfWindow = 2;

/// Sub-cell peak of a 1D distribution, in fractional cell index units.
/// Starts at the center of the tied maxima and repeatedly recenters a
/// (2h+1)-cell box window on its probability-weighted mean, weighting the
/// boundary cells by their overlap with the window.
double soft_argmax_1d(std::span<const double> marginal, int half_window = kSoftArgmaxHalfWindow);

ExtractedKeypoint extract_keypoint(const ScalarGrid& prob);

/// Transition point of the smooth-L1 penalty, meters.
inline constexpr double kSmoothL1Beta = 1.0;

double smooth_l1(double x, double beta = kSmoothL1Beta);

/// Smooth-L1 summed over the three coordinates and averaged over keypoints.
double keypoint_loss(std::span<const Vec3> predicted, std::span<const Vec3> target,
                     double beta = kSmoothL1Beta);

}  // namespace posevolume
