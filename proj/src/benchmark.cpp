#include "posevolume/benchmark.hpp"

#include <algorithm>
#include <limits>

#include "posevolume/error.hpp"

namespace posevolume {

SceneInputs SyntheticCase::inputs() const {
  return SceneInputs{scene.pair,     features.ref,          features.query, keypoints,
                     model.diameter, config.prior_depth_m, scene.object_pose};
}

SyntheticCase make_case(const SynthConfig& cfg, const ModelPoints& model) {
  std::vector<Vec3> keypoints = select_keypoints(model, cfg.n_keypoints);
  Scene scene = generate_scene(cfg, model);
  OracleFeatures features = oracle_features(scene, model, keypoints, cfg);
  return SyntheticCase{cfg, model, std::move(keypoints), std::move(scene), std::move(features)};
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Volume: return "volume";
    case Method::LateFusion: return "late_fusion";
    case Method::KabschAll: return "kabsch_all";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::Volume, Method::LateFusion, Method::KabschAll}) {
    if (method_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) +
                                              "' (expected volume, late_fusion or kabsch_all)");
}

PoseOutcome failed_outcome() {
  const double inf = std::numeric_limits<double>::infinity();
  return {true, inf, inf, false, inf};
}

PoseOutcome score_pose(const RigidTransform& est, const SyntheticCase& c) {
  PoseOutcome out;
  out.add = add_metric(est, c.scene.object_pose, c.model);
  out.adds = adds_metric(est, c.scene.object_pose, c.model);
  out.success = success(est, c.scene.object_pose, c.model);
  return out;
}

namespace {

std::vector<Vec3> positions(const std::vector<ExtractedKeypoint>& kps) {
  std::vector<Vec3> out;
  for (const auto& k : kps) out.push_back(k.position);
  return out;
}

}  // namespace

CaseEvaluation evaluate_case(const SyntheticCase& c, Method method, const PipelineConfig& cfg,
                             std::optional<Vec3> center_override) {
  const SceneInputs in = c.inputs();
  const RigidTransform& gt = c.scene.object_pose;
  CaseEvaluation out;
  try {
    if (method == Method::LateFusion) {
      const LateFusionResult r = run_late_fusion(in, cfg.solver);
      out.final = score_pose(r.pose, c);
      out.final.keypoint_error = mean_keypoint_error(r.points, r.indices, c.keypoints, gt);
      return out;
    }
    PipelineConfig level_cfg = cfg;
    level_cfg.pose_solver = method == Method::KabschAll ? PoseSolver::KabschAll : PoseSolver::SoftRansac;
    const CoarseToFineResult r = run_coarse_to_fine(level_cfg, in, center_override);
    out.final = score_pose(r.fine.pose, c);
    out.final.keypoint_error = mean_keypoint_error(positions(r.fine.keypoints), {}, c.keypoints, gt);
    out.coarse = score_pose(r.coarse.pose, c);
    out.coarse->keypoint_error = mean_keypoint_error(positions(r.coarse.keypoints), {}, c.keypoints, gt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewPoints && e.code() != ErrorCode::DegenerateConfiguration &&
        e.code() != ErrorCode::EmptyMask) {
      throw;
    }
    out.final = failed_outcome();
    if (method != Method::LateFusion) out.coarse = failed_outcome();
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace posevolume
