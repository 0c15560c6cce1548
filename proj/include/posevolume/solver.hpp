#pragma once

#include <array>
#include <span>
#include <vector>

#include "posevolume/geometry.hpp"

namespace posevolume {

/// Model keypoints paired index-by-index with their scene estimates.
struct Correspondences {
  std::vector<Vec3> model;
  std::vector<Vec3> scene;

  std::size_t size() const { return model.size(); }
  void validate() const;
};

struct SolverParams {
  /// Sigmoid sharpness, 1/m.
  double gamma1 = 100.0;
  /// Soft inlier threshold, m.
  double gamma2 = 0.02;
  /// Softmax temperature over the soft inlier counts.
  double temperature = 1.0;

  void validate() const;
};

/// Least-squares rigid transform taking model points onto scene points
/// (SVD of the cross covariance with reflection correction).
/// Throws DegenerateConfiguration when the model points are collinear.
RigidTransform kabsch_align(std::span<const Vec3> model, std::span<const Vec3> scene);

struct HypothesisList {
  std::vector<RigidTransform> poses;
  /// Index triple each pose was fitted from.
  std::vector<std::array<int, 3>> subsets;
  /// Triples skipped because their model points were collinear.
  std::vector<std::array<int, 3>> degenerate;
};

/// One Kabsch pose per 3-subset, lexicographic order.
HypothesisList enumerate_hypotheses(const Correspondences& c);

struct HypothesisSet {
  std::vector<RigidTransform> hypotheses;
  /// distances[k][i] = |theta_k m_i - p_i|
  std::vector<std::vector<double>> distances;
  /// Soft inlier count of each hypothesis, before the softmax.
  std::vector<double> raw_scores;
  /// Softmax-normalized weights.
  std::vector<double> scores;
};

double sigmoid(double x);

HypothesisSet score_hypotheses(std::span<const RigidTransform> hypotheses, const Correspondences& c,
                               const SolverParams& params);

/// Score-weighted mean translation and chordal mean rotation.
RigidTransform aggregate_pose(const HypothesisSet& set);

/// Closest rotation (Frobenius) to an arbitrary 3x3 matrix.
Mat3 project_to_rotation(const Mat3& m);

struct SolveResult {
  RigidTransform pose;
  HypothesisSet hypotheses;
  std::vector<std::array<int, 3>> degenerate_subsets;
};

/// Exhaustive soft RANSAC: enumerate, score, aggregate.
SolveResult solve(const Correspondences& c, const SolverParams& params = {});

/// |t_est - t_gt| + alpha |R_est R_gt^T - I|_F
double pose_loss(const RigidTransform& est, const RigidTransform& gt, double alpha = 1.0);

struct LevelLosses {
  double pose = 0.0;
  double keypoint = 0.0;
  double kl = 0.0;
};

struct LossWeights {
  double beta1 = 1.0;
  double beta2 = 1.0;
  double beta3 = 1.0;
};

/// sum_j beta1 L_pose_j + beta2 L_kpt_j + beta3 L_KL_j
double joint_loss(std::span<const LevelLosses> levels, const LossWeights& weights);

}  // namespace posevolume
