#include "posevolume/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "posevolume/error.hpp"

namespace posevolume {

namespace fs = std::filesystem;
using json = nlohmann::json;

SyntheticCase load_case(const io::SceneManifest& m, const fs::path& dir) {
  ModelPoints model = io::load_model(m.model, m.model_symmetric);
  std::vector<Vec3> keypoints = select_keypoints(model, m.synth.n_keypoints);
  Scene scene = m.scene();
  OracleFeatures features;
  if (m.feature_dumps.empty()) {
    features = oracle_features(scene, model, keypoints, m.synth);
  } else {
    if (m.feature_dumps.size() % 2 != 0) {
      throw Error(ErrorCode::SchemaMismatch, "scene " + m.scene_id + " lists an odd number of feature dumps");
    }
    const std::size_t taps = m.feature_dumps.size() / 2;
    for (std::size_t i = 0; i < m.feature_dumps.size(); ++i) {
      FeatureMap map = io::read_feature_map(dir / m.feature_dumps[i]);
      (i < taps ? features.ref : features.query).push_back(std::move(map));
    }
  }
  return SyntheticCase{m.synth, std::move(model), std::move(keypoints), std::move(scene), std::move(features)};
}

GenerateSummary generate_scenes(const io::GenerateConfig& cfg, const fs::path& out_dir) {
  if (!fs::is_directory(out_dir)) {
    throw Error(ErrorCode::IoError, "output directory does not exist: " + out_dir.string());
  }
  if (cfg.scenes < 1) throw Error(ErrorCode::InvalidArgument, "scene count must be >= 1");
  if (cfg.occlusion_sweep && cfg.occlusion_levels.empty()) {
    throw Error(ErrorCode::InvalidArgument, "occlusion sweep needs at least one level");
  }
  const ModelPoints model = io::load_model(cfg.model, cfg.model_symmetric);
  const std::vector<Vec3> keypoints = select_keypoints(model, cfg.synth.n_keypoints);

  GenerateSummary summary;
  for (int i = 0; i < cfg.scenes; ++i) {
    SynthConfig synth = cfg.synth;
    synth.seed = derive_seed(cfg.synth.seed, static_cast<std::uint64_t>(i));
    if (cfg.occlusion_sweep) {
      synth.occlusion_fraction = cfg.occlusion_levels[static_cast<std::size_t>(i) % cfg.occlusion_levels.size()];
    }
    const Scene scene = generate_scene(synth, model);

    char id[32];
    std::snprintf(id, sizeof id, "scene_%04d", i);
    io::SceneManifest m = io::make_manifest(id, cfg.model, cfg.model_symmetric, synth, scene);
    if (cfg.dump_features) {
      const OracleFeatures f = oracle_features(scene, model, keypoints, synth);
      const auto dump = [&](const FeatureMap& map, const char* view, std::size_t tap) {
        const std::string name = std::string(id) + "_" + view + std::to_string(tap) + ".bin";
        io::write_feature_map(out_dir / name, map);
        m.feature_dumps.push_back(name);
      };
      for (std::size_t t = 0; t < f.ref.size(); ++t) dump(f.ref[t], "ref", t);
      for (std::size_t t = 0; t < f.query.size(); ++t) dump(f.query[t], "query", t);
    }
    const fs::path path = out_dir / (std::string(id) + ".json");
    io::write_text(path, io::manifest_to_json(m));
    summary.manifests.push_back(path);

    auto it = std::find_if(summary.occlusion_counts.begin(), summary.occlusion_counts.end(),
                           [&](const auto& p) { return p.first == synth.occlusion_fraction; });
    if (it == summary.occlusion_counts.end()) {
      summary.occlusion_counts.emplace_back(synth.occlusion_fraction, 1);
    } else {
      ++it->second;
    }
  }
  return summary;
}

std::vector<fs::path> list_manifests(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "scene directory does not exist: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        entry.path().filename().string().rfind("scene_", 0) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int worker_count() {
  if (const char* env = std::getenv("POSEVOLUME_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<int>(std::min(n, 256L));
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

EvaluationSummary evaluate_directory(const fs::path& dir, Method method, const PipelineConfig& cfg, int threads,
                                     int max_scenes) {
  cfg.validate();
  std::vector<fs::path> manifests = list_manifests(dir);
  if (manifests.empty()) throw Error(ErrorCode::IoError, "no scene manifests in " + dir.string());
  if (max_scenes > 0 && static_cast<std::size_t>(max_scenes) < manifests.size()) manifests.resize(max_scenes);

  std::vector<ResultRow> rows(manifests.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < manifests.size(); i = next++) {
      try {
        const io::SceneManifest m = io::manifest_from_json(io::read_text(manifests[i]));
        const SyntheticCase c = load_case(m, dir);
        const PoseOutcome o = evaluate_case(c, method, cfg).final;
        rows[i] = {m.scene_id, std::string(method_name(method)), o.add, o.adds, o.success, m.invisible_fraction};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = manifests.size();
      }
    }
  };
  const int n_workers = std::clamp(threads, 1, static_cast<int>(manifests.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return summarize(std::string(method_name(method)), std::move(rows));
}

EvaluationSummary summarize(std::string method, std::vector<ResultRow> rows, const std::vector<double>& edges) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "no result rows to summarize");
  EvaluationSummary s;
  s.method = std::move(method);
  std::vector<double> adds;
  std::vector<OcclusionSample> samples;
  int successes = 0;
  for (const ResultRow& r : rows) {
    adds.push_back(r.add);
    samples.push_back({r.success, r.invisible_fraction});
    successes += r.success ? 1 : 0;
  }
  s.success_rate = static_cast<double>(successes) / rows.size();
  s.median_add = median(adds);
  s.bins = occlusion_curve(samples, edges);
  s.rows = std::move(rows);
  return s;
}

std::string summary_to_json(const EvaluationSummary& s) {
  json bins = json::array();
  for (const OcclusionBin& b : s.bins) {
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"total", b.total},
                    {"successes", b.successes},
                    {"accuracy", b.accuracy ? json(*b.accuracy) : json(nullptr)}});
  }
  // An infinite median (every pose failed) has no JSON number.
  const json median_add = std::isfinite(s.median_add) ? json(s.median_add) : json(nullptr);
  const json j{{"method", s.method},
               {"scenes", s.rows.size()},
               {"success_rate", s.success_rate},
               {"median_add_m", median_add},
               {"occlusion_bins", bins}};
  return j.dump(2) + "\n";
}

std::string occlusion_report_csv(const std::vector<EvaluationSummary>& summaries) {
  std::string out = "method,bin_lo,bin_hi,total,successes,accuracy\n";
  char line[160];
  for (const EvaluationSummary& s : summaries) {
    for (const OcclusionBin& b : s.bins) {
      std::snprintf(line, sizeof line, "%s,%.3f,%.3f,%zu,%zu,", s.method.c_str(), b.lo, b.hi, b.total, b.successes);
      out += line;
      if (b.accuracy) {
        std::snprintf(line, sizeof line, "%.6f", *b.accuracy);
        out += line;
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace posevolume
