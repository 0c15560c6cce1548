#include "posevolume/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "posevolume/error.hpp"

namespace posevolume {

void Correspondences::validate() const {
  if (model.size() != scene.size()) {
    throw Error(ErrorCode::CountMismatch, "model and scene point counts differ");
  }
  if (model.size() < 3) throw Error(ErrorCode::TooFewPoints, "at least 3 correspondences are required");
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (!model[i].allFinite() || !scene[i].allFinite()) {
      throw Error(ErrorCode::NonFiniteInput, "correspondence coordinates must be finite");
    }
  }
}

void SolverParams::validate() const {
  if (!(gamma1 > 0.0 && gamma2 > 0.0 && temperature > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gamma1, gamma2 and temperature must be positive");
  }
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * fix * v.transpose();
}

RigidTransform kabsch_align(std::span<const Vec3> model, std::span<const Vec3> scene) {
  if (model.size() != scene.size()) {
    throw Error(ErrorCode::CountMismatch, "model and scene point counts differ");
  }
  if (model.size() < 3) throw Error(ErrorCode::TooFewPoints, "at least 3 points are required");

  const double n = static_cast<double>(model.size());
  Vec3 model_mean = Vec3::Zero();
  Vec3 scene_mean = Vec3::Zero();
  for (std::size_t i = 0; i < model.size(); ++i) {
    model_mean += model[i];
    scene_mean += scene[i];
  }
  model_mean /= n;
  scene_mean /= n;

  Mat3 cross = Mat3::Zero();
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Vec3 a = model[i] - model_mean;
    cross += a * (scene[i] - scene_mean).transpose();
    scatter += a * a.transpose();
  }

  // A 3-point cross covariance is always rank deficient, so collinearity is
  // judged on the model scatter: its two leading eigenvalues must be nonzero.
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter, Eigen::EigenvaluesOnly);
  const Vec3 lambda = eig.eigenvalues();  // ascending
  if (!(lambda[2] > 0.0) || lambda[1] < 1e-12 * lambda[2]) {
    throw Error(ErrorCode::DegenerateConfiguration, "model points are collinear or coincident");
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 rotation = v * fix * u.transpose();
  return {rotation, scene_mean - rotation * model_mean};
}

HypothesisList enumerate_hypotheses(const Correspondences& c) {
  c.validate();
  const int n = static_cast<int>(c.size());
  HypothesisList out;
  out.poses.reserve(static_cast<std::size_t>(n) * (n - 1) * (n - 2) / 6);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int d = b + 1; d < n; ++d) {
        const std::array<Vec3, 3> model{c.model[a], c.model[b], c.model[d]};
        const std::array<Vec3, 3> scene{c.scene[a], c.scene[b], c.scene[d]};
        try {
          out.poses.push_back(kabsch_align(model, scene));
          out.subsets.push_back({a, b, d});
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateConfiguration) throw;
          out.degenerate.push_back({a, b, d});
        }
      }
    }
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

HypothesisSet score_hypotheses(std::span<const RigidTransform> hypotheses, const Correspondences& c,
                               const SolverParams& params) {
  params.validate();
  if (hypotheses.empty()) throw Error(ErrorCode::InvalidArgument, "no hypotheses to score");
  if (c.model.size() != c.scene.size()) {
    throw Error(ErrorCode::CountMismatch, "model and scene point counts differ");
  }

  HypothesisSet set;
  set.hypotheses.assign(hypotheses.begin(), hypotheses.end());
  set.distances.resize(hypotheses.size());
  set.raw_scores.resize(hypotheses.size());
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    auto& row = set.distances[k];
    row.resize(c.size());
    double count = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      row[i] = (hypotheses[k].apply(c.model[i]) - c.scene[i]).norm();
      count += sigmoid(params.gamma1 * (-row[i] + params.gamma2));
    }
    set.raw_scores[k] = count;
  }

  const double peak = *std::max_element(set.raw_scores.begin(), set.raw_scores.end());
  set.scores.resize(hypotheses.size());
  double total = 0.0;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    set.scores[k] = std::exp((set.raw_scores[k] - peak) / params.temperature);
    total += set.scores[k];
  }
  for (double& s : set.scores) s /= total;
  return set;
}

RigidTransform aggregate_pose(const HypothesisSet& set) {
  if (set.hypotheses.empty() || set.scores.size() != set.hypotheses.size()) {
    throw Error(ErrorCode::InvalidArgument, "hypothesis set has no scored poses");
  }
  Mat3 rotation_sum = Mat3::Zero();
  Vec3 translation = Vec3::Zero();
  for (std::size_t k = 0; k < set.hypotheses.size(); ++k) {
    rotation_sum += set.scores[k] * set.hypotheses[k].rotation();
    translation += set.scores[k] * set.hypotheses[k].translation();
  }
  return {project_to_rotation(rotation_sum), translation};
}

SolveResult solve(const Correspondences& c, const SolverParams& params) {
  HypothesisList list = enumerate_hypotheses(c);
  if (list.poses.empty()) {
    throw Error(ErrorCode::DegenerateConfiguration, "every 3-subset of model points is collinear");
  }
  SolveResult out{RigidTransform{}, score_hypotheses(list.poses, c, params), std::move(list.degenerate)};
  out.pose = aggregate_pose(out.hypotheses);
  return out;
}

double pose_loss(const RigidTransform& est, const RigidTransform& gt, double alpha) {
  const double dt = (est.translation() - gt.translation()).norm();
  const double dr = (est.rotation() * gt.rotation().transpose() - Mat3::Identity()).norm();
  return dt + alpha * dr;
}

double joint_loss(std::span<const LevelLosses> levels, const LossWeights& w) {
  double total = 0.0;
  for (const LevelLosses& l : levels) total += w.beta1 * l.pose + w.beta2 * l.keypoint + w.beta3 * l.kl;
  return total;
}

}  // namespace posevolume
