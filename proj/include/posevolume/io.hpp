#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "posevolume/field.hpp"
#include "posevolume/geometry.hpp"
#include "posevolume/pipeline.hpp"
#include "posevolume/synth.hpp"
#include "posevolume/volume.hpp"

// nlohmann::json is an implementation detail; callers exchange JSON as text.
namespace posevolume::io {

std::string pose_to_json(const RigidTransform& pose);
RigidTransform pose_from_json(const std::string& text);
std::string intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const std::string& text);

/// Settings of a `generate` run, read from a JSON config file.
struct GenerateConfig {
  SynthConfig synth;
  /// Built-in model name or path to a PLY file.
  std::string model = "ape";
  bool model_symmetric = false;
  int scenes = 10;
  /// Assign scenes round-robin to the occlusion levels below.
  bool occlusion_sweep = false;
  std::vector<double> occlusion_levels{0.1, 0.3, 0.5, 0.7, 0.9};
  bool dump_features = false;
};

/// Parses a generate config. Unknown keys are rejected; errors name the
/// offending field or the line/column of the syntax error.
GenerateConfig parse_generate_config(const std::string& text);
std::string generate_config_to_json(const GenerateConfig& cfg);

/// Pipeline overrides; keys carry their units (e.g. "coarse_cell_m").
PipelineConfig parse_pipeline_config(const std::string& text);
std::string pipeline_config_to_json(const PipelineConfig& cfg);

/// Everything needed to rebuild a scene and its oracle features.
struct SceneManifest {
  std::string scene_id;
  std::string model;
  bool model_symmetric = false;
  SynthConfig synth;
  RigidTransform object_pose;
  CameraIntrinsics intrinsics;
  RigidTransform ref_from_world;
  RigidTransform query_from_world;
  OccluderRect occluder;
  double invisible_fraction = 0.0;
  /// Feature dump file names relative to the manifest, ref taps then query taps.
  std::vector<std::string> feature_dumps;

  Scene scene() const;
};

SceneManifest make_manifest(const std::string& scene_id, const std::string& model, bool symmetric,
                            const SynthConfig& synth, const Scene& scene);
std::string manifest_to_json(const SceneManifest& m);
/// Throws SchemaMismatch when required fields are missing or ill-typed.
SceneManifest manifest_from_json(const std::string& text);

/// Loads a built-in model by name, otherwise treats the string as a PLY path.
ModelPoints load_model(const std::string& name_or_path, bool symmetric);

// Binary dumps: one JSON header line, then little-endian float32 payload.
void write_volume(const std::filesystem::path& path, const GeometricVolume& volume);
GeometricVolume read_volume(const std::filesystem::path& path);
void write_scalar_grid(const std::filesystem::path& path, const ScalarGrid& grid);
void write_feature_map(const std::filesystem::path& path, const FeatureMap& map);
FeatureMap read_feature_map(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace posevolume::io
