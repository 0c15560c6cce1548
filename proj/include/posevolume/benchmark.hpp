#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "posevolume/metrics.hpp"
#include "posevolume/pipeline.hpp"
#include "posevolume/synth.hpp"

namespace posevolume {

/// A generated scene with everything the estimators consume.
struct SyntheticCase {
  SynthConfig config;
  ModelPoints model;
  std::vector<Vec3> keypoints;
  Scene scene;
  OracleFeatures features;

  SceneInputs inputs() const;
};

SyntheticCase make_case(const SynthConfig& cfg, const ModelPoints& model);

enum class Method { Volume, LateFusion, KabschAll };

std::string_view method_name(Method m);
/// Throws InvalidArgument for unknown names.
Method parse_method(std::string_view name);

/// Pose quality of one estimate. A failed estimate has infinite errors.
struct PoseOutcome {
  bool failed = false;
  double add = 0.0;
  double adds = 0.0;
  bool success = false;
  double keypoint_error = 0.0;
};

PoseOutcome score_pose(const RigidTransform& est, const SyntheticCase& c);
PoseOutcome failed_outcome();

struct CaseEvaluation {
  PoseOutcome final;
  /// Coarse level of the volume pipeline, when it ran.
  std::optional<PoseOutcome> coarse;
};

CaseEvaluation evaluate_case(const SyntheticCase& c, Method method, const PipelineConfig& cfg = {},
                             std::optional<Vec3> center_override = std::nullopt);

double median(std::vector<double> values);

}  // namespace posevolume
