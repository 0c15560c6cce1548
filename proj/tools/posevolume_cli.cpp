// posevolume: generate synthetic two-view scenes, evaluate pose estimators on
// them and emit plot-ready occlusion tables.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "posevolume/error.hpp"
#include "posevolume/io.hpp"
#include "posevolume/runner.hpp"

namespace fs = std::filesystem;
using namespace posevolume;

namespace {

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<int> scenes;
  std::optional<std::uint64_t> seed;
  bool occlusion_sweep = false;
  bool dump_features = false;
};

struct EvaluateArgs {
  std::string scene_dir;
  std::string out;
  std::string method = "volume";
  std::string config;
  int scenes = 0;
};

struct ReportArgs {
  std::vector<std::string> results;
  std::string out;
};

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "output directory does not exist: " + dir.string());
}

int run_generate(const GenerateArgs& a) {
  io::GenerateConfig cfg;
  if (!a.config.empty()) cfg = io::parse_generate_config(io::read_text(a.config));
  if (a.scenes) cfg.scenes = *a.scenes;
  if (a.seed) cfg.synth.seed = *a.seed;
  if (a.occlusion_sweep) cfg.occlusion_sweep = true;
  if (a.dump_features) cfg.dump_features = true;

  const GenerateSummary s = generate_scenes(cfg, a.out);
  std::string levels;
  for (const auto& [fraction, count] : s.occlusion_counts) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%.2f:%d", levels.empty() ? "" : " ", fraction, count);
    levels += buf;
  }
  std::printf("generated %zu scenes in %s (model %s, seed %llu, occlusion %s)\n", s.manifests.size(),
              a.out.c_str(), cfg.model.c_str(), static_cast<unsigned long long>(cfg.synth.seed), levels.c_str());
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  const Method method = parse_method(a.method);
  PipelineConfig cfg;
  if (!a.config.empty()) cfg = io::parse_pipeline_config(io::read_text(a.config));
  require_dir(a.out);

  const EvaluationSummary s = evaluate_directory(a.scene_dir, method, cfg, worker_count(), a.scenes);
  const fs::path out(a.out);
  io::write_text(out / ("results_" + s.method + ".csv"), format_results_csv(s.rows));
  io::write_text(out / ("summary_" + s.method + ".json"), summary_to_json(s));
  std::printf("%s: %zu scenes, success rate %.4f, median ADD %.6f m\n", s.method.c_str(), s.rows.size(),
              s.success_rate, s.median_add);
  return 0;
}

int run_report(const ReportArgs& a) {
  std::vector<EvaluationSummary> summaries;
  for (const std::string& path : a.results) {
    std::vector<ResultRow> rows = parse_results_csv(io::read_text(path));
    if (rows.empty()) throw Error(ErrorCode::SchemaMismatch, "no rows in " + path);
    std::string method = rows.front().method;
    summaries.push_back(summarize(std::move(method), std::move(rows)));
  }
  const std::string csv = occlusion_report_csv(summaries);
  if (a.out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    io::write_text(a.out, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-view volumetric 6D pose toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* g = app.add_subcommand("generate", "Write synthetic scene manifests");
  g->add_option("--config", gen.config, "Generate config (JSON)")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Existing output directory")->required();
  g->add_option("--scenes", gen.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Base seed");
  g->add_flag("--occlusion-sweep", gen.occlusion_sweep, "Spread scenes over the configured occlusion levels");
  g->add_flag("--dump-features", gen.dump_features, "Also write the oracle feature maps");

  EvaluateArgs ev;
  CLI::App* e = app.add_subcommand("evaluate", "Run an estimator on a scene directory");
  e->add_option("scene_dir", ev.scene_dir, "Directory written by generate")->required();
  e->add_option("--out", ev.out, "Existing output directory")->required();
  e->add_option("--method", ev.method, "volume, late_fusion or kabsch_all")
      ->check(CLI::IsMember({"volume", "late_fusion", "kabsch_all"}));
  e->add_option("--config", ev.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  e->add_option("--scenes", ev.scenes, "Evaluate only the first N scenes")->check(CLI::PositiveNumber);

  ReportArgs rep;
  CLI::App* r = app.add_subcommand("report", "Accuracy per occlusion bin from results CSVs");
  r->add_option("results", rep.results, "Results CSV files")->required();
  r->add_option("--out", rep.out, "Output CSV (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return run_generate(gen);
    if (e->parsed()) return run_evaluate(ev);
    return run_report(rep);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
  }
  return 1;
}
