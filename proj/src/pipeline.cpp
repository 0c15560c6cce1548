#include "posevolume/pipeline.hpp"

#include <cmath>

#include "posevolume/error.hpp"

namespace posevolume {

void PipelineConfig::validate() const {
  if (!(coarse_cell > 0.0 && fine_cell > 0.0) || !(fine_cell < coarse_cell)) {
    throw Error(ErrorCode::InvalidArgument, "cell sizes must satisfy 0 < fine_cell < coarse_cell");
  }
  if (!(coarse_half_range.array() > 0.0).all() || !(fine_range_factor > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "ranges must be positive");
  }
  if (!(sigma_factor > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_factor must be positive");
  for (const auto* gains : {&coarse_tap_gains, &fine_tap_gains}) {
    if (gains->empty()) throw Error(ErrorCode::InvalidArgument, "tap gains must not be empty");
    for (double g : *gains) {
      if (!(g >= 0.0) || !std::isfinite(g)) throw Error(ErrorCode::InvalidArgument, "tap gains must be >= 0");
    }
  }
  solver.validate();
}

Vec3 initial_guess(const FeatureMap& ref_mask, const CameraIntrinsics& k, double prior_depth,
                   const RigidTransform& ref_from_world) {
  double su = 0.0;
  double sv = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < ref_mask.height; ++v) {
    for (int u = 0; u < ref_mask.width; ++u) {
      if (ref_mask.mask_at(u, v) > 0.5f) {
        su += u;
        sv += v;
        ++count;
      }
    }
  }
  if (count == 0) throw Error(ErrorCode::EmptyMask, "reference mask has no object pixels");
  const CameraIntrinsics mk = k.scaled_to(ref_mask.width, ref_mask.height);
  const Vec3 camera = unproject_pixel(su / count, sv / count, prior_depth, mk);
  return ref_from_world.inverse().apply(camera);
}

std::vector<ScalarGrid> keypoint_fields(const GeometricVolume& volume, std::size_t n_keypoints,
                                        std::span<const double> tap_gains) {
  if (n_keypoints == 0 || volume.channels % n_keypoints != 0) {
    throw Error(ErrorCode::InvalidArgument, "volume channels are not a multiple of the keypoint count");
  }
  if (tap_gains.empty()) throw Error(ErrorCode::InvalidArgument, "at least one tap gain is required");
  const std::size_t cells = volume.spec.cell_count();
  const std::size_t channels = static_cast<std::size_t>(volume.channels);
  std::vector<double> channel_gain(channels);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    channel_gain[ch] = tap_gains[(ch / n_keypoints) % tap_gains.size()];
  }
  std::vector<ScalarGrid> raw(n_keypoints, ScalarGrid{volume.spec, std::vector<double>(cells, 0.0)});
  for (std::size_t j = 0; j < cells; ++j) {
    const float* cell = volume.values.data() + j * channels;
    for (std::size_t ch = 0; ch < channels; ++ch) raw[ch % n_keypoints].values[j] += channel_gain[ch] * cell[ch];
  }
  std::vector<ScalarGrid> out;
  out.reserve(n_keypoints);
  for (const ScalarGrid& grid : raw) out.push_back(normalize_field(grid));
  return out;
}

namespace {

std::vector<Vec3> posed(const std::vector<Vec3>& model, const RigidTransform& pose) {
  std::vector<Vec3> out;
  out.reserve(model.size());
  for (const Vec3& m : model) out.push_back(pose.apply(m));
  return out;
}

}  // namespace

LevelResult run_level(const Vec3& center, double cell, const Vec3& half_range, const SceneInputs& in,
                      const PipelineConfig& cfg, std::span<const double> tap_gains) {
  const std::size_t n = in.keypoints.size();
  LevelResult out;
  out.grid = build_grid(center, half_range, cell);
  const std::vector<ScalarGrid> fields =
      keypoint_fields(lift_features(out.grid, in.ref, in.query, in.pair), n, tap_gains);

  Correspondences c;
  c.model = in.keypoints;
  for (const ScalarGrid& field : fields) {
    out.keypoints.push_back(extract_keypoint(field));
    c.scene.push_back(out.keypoints.back().position);
    out.diagnostics.low_confidence += out.keypoints.back().low_confidence ? 1 : 0;
  }
  out.pose = cfg.pose_solver == PoseSolver::SoftRansac ? solve(c, cfg.solver).pose
                                                       : kabsch_align(c.model, c.scene);

  if (in.ground_truth) {
    const RigidTransform& gt = *in.ground_truth;
    const TargetHeatmaps target =
        TargetHeatmaps::with_uniform_sigma(in.keypoints, gt, cfg.sigma_factor * cell);
    double kl = 0.0;
    int covered = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!out.grid.contains(gt.apply(in.keypoints[i]))) continue;
      kl += kl_divergence(fields[i], rasterize_heatmap(target, out.grid, i));
      ++covered;
    }
    if (covered > 0) out.diagnostics.kl = kl / covered;
    out.diagnostics.keypoint_loss = keypoint_loss(c.scene, posed(in.keypoints, gt));
    out.diagnostics.pose_loss = pose_loss(out.pose, gt, cfg.alpha);
  }
  return out;
}

CoarseToFineResult run_coarse_to_fine(const PipelineConfig& cfg, const SceneInputs& in,
                                      std::optional<Vec3> center_override) {
  cfg.validate();
  if (in.ref.empty() || in.keypoints.empty()) {
    throw Error(ErrorCode::InvalidArgument, "scene inputs need feature maps and keypoints");
  }
  if (!(in.model_diameter > 0.0)) throw Error(ErrorCode::InvalidArgument, "model diameter must be positive");

  CoarseToFineResult out;
  out.initial_guess = center_override
                          ? *center_override
                          : initial_guess(in.ref.front(), in.pair.intrinsics(), in.prior_depth,
                                          in.pair.ref_from_world());
  out.coarse = run_level(out.initial_guess, cfg.coarse_cell, cfg.coarse_half_range, in, cfg,
                         cfg.coarse_tap_gains);
  const Vec3 fine_center = out.coarse.pose.apply(in.keypoints.front());
  const Vec3 fine_half = Vec3::Constant(cfg.fine_range_factor * in.model_diameter);
  out.fine = run_level(fine_center, cfg.fine_cell, fine_half, in, cfg, cfg.fine_tap_gains);

  if (in.ground_truth) {
    std::vector<LevelLosses> levels;
    for (const LevelResult* level : {&out.coarse, &out.fine}) {
      const LevelDiagnostics& d = level->diagnostics;
      levels.push_back({d.pose_loss.value_or(0.0), d.keypoint_loss.value_or(0.0), d.kl.value_or(0.0)});
    }
    out.joint_loss = joint_loss(levels, cfg.betas);
  }
  return out;
}

Vec2 extract_keypoint_2d(const FeatureMap& map, int channel, int half_window) {
  if (channel < 0 || channel >= map.channels) throw Error(ErrorCode::InvalidArgument, "channel out of range");
  std::vector<double> mu(static_cast<std::size_t>(map.width), 0.0);
  std::vector<double> mv(static_cast<std::size_t>(map.height), 0.0);
  for (int v = 0; v < map.height; ++v) {
    for (int u = 0; u < map.width; ++u) {
      const double x = map.pixel(u, v)[channel];
      mu[u] += x;
      mv[v] += x;
    }
  }
  return {soft_argmax_1d(mu, half_window), soft_argmax_1d(mv, half_window)};
}

LateFusionResult run_late_fusion(const SceneInputs& in, const SolverParams& params) {
  if (in.ref.empty() || in.query.empty()) throw Error(ErrorCode::InvalidArgument, "missing feature maps");
  const FeatureMap& ref = in.ref.front();
  const FeatureMap& query = in.query.front();
  const CameraIntrinsics& k = in.pair.intrinsics();
  if (ref.width != k.width || ref.height != k.height || query.width != k.width || query.height != k.height) {
    throw Error(ErrorCode::InvalidArgument, "late fusion expects full-resolution maps first");
  }

  LateFusionResult out;
  Correspondences c;
  for (int i = 0; i < static_cast<int>(in.keypoints.size()); ++i) {
    try {
      const Vec3 p = triangulate(extract_keypoint_2d(ref, i), extract_keypoint_2d(query, i), in.pair);
      out.indices.push_back(i);
      out.points.push_back(p);
      c.model.push_back(in.keypoints[i]);
      c.scene.push_back(p);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateRays) throw;
    }
  }
  if (c.size() < 3) throw Error(ErrorCode::TooFewPoints, "fewer than 3 keypoints triangulated");
  out.pose = solve(c, params).pose;
  return out;
}

double mean_keypoint_error(std::span<const Vec3> estimated, std::span<const int> indices,
                           const std::vector<Vec3>& model_keypoints, const RigidTransform& gt) {
  if (!indices.empty() && indices.size() != estimated.size()) {
    throw Error(ErrorCode::CountMismatch, "one index per estimated keypoint is required");
  }
  if (estimated.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < estimated.size(); ++j) {
    const std::size_t i = indices.empty() ? j : static_cast<std::size_t>(indices[j]);
    total += (estimated[j] - gt.apply(model_keypoints.at(i))).norm();
  }
  return total / static_cast<double>(estimated.size());
}

}  // namespace posevolume
