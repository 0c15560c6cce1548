#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "posevolume/benchmark.hpp"
#include "posevolume/io.hpp"
#include "posevolume/metrics.hpp"

namespace posevolume {

/// Rebuilds a case from a manifest. Feature dumps listed in the manifest are
/// read from `dir`; otherwise the oracle features are regenerated from the
/// manifest seed.
SyntheticCase load_case(const io::SceneManifest& manifest, const std::filesystem::path& dir);

struct GenerateSummary {
  std::vector<std::filesystem::path> manifests;
  /// Scenes per requested occlusion fraction, in first-seen order.
  std::vector<std::pair<double, int>> occlusion_counts;
};

/// Writes one manifest per scene (and feature dumps when enabled) into an
/// existing directory. Scene i uses seed derive_seed(cfg.synth.seed, i).
GenerateSummary generate_scenes(const io::GenerateConfig& cfg, const std::filesystem::path& out_dir);

/// Manifest files of a scene directory, sorted by name.
std::vector<std::filesystem::path> list_manifests(const std::filesystem::path& dir);

/// Worker count from POSEVOLUME_THREADS, else the hardware concurrency.
int worker_count();

inline const std::vector<double> kDefaultOcclusionEdges{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

struct EvaluationSummary {
  std::string method;
  std::vector<ResultRow> rows;
  double success_rate = 0.0;
  double median_add = 0.0;
  std::vector<OcclusionBin> bins;
};

/// Evaluates every scene of a directory (at most `max_scenes` when positive)
/// with a pool of `threads` workers. Rows come back in manifest order.
EvaluationSummary evaluate_directory(const std::filesystem::path& dir, Method method, const PipelineConfig& cfg,
                                     int threads, int max_scenes = 0);

EvaluationSummary summarize(std::string method, std::vector<ResultRow> rows,
                            const std::vector<double>& edges = kDefaultOcclusionEdges);

std::string summary_to_json(const EvaluationSummary& s);

/// Plot-ready accuracy per occlusion bin, one block of rows per method.
std::string occlusion_report_csv(const std::vector<EvaluationSummary>& summaries);

}  // namespace posevolume
