#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "posevolume/io.hpp"

namespace fs = std::filesystem;
using posevolume::io::read_text;

#ifdef POSEVOLUME_CLI_PATH

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

/// Runs the CLI with stdout and stderr captured to files; returns the exit status.
int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + POSEVOLUME_CLI_PATH + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("generate, evaluate and report end to end") {
    TempDir dir("posevolume_cli_e2e");
    const fs::path scenes = dir.path / "scenes", out = dir.path / "out", again = dir.path / "again";
    fs::create_directories(scenes);
    fs::create_directories(out);
    fs::create_directories(again);
    const fs::path log = dir.path / "log.txt";

    REQUIRE(run("generate --out \"" + scenes.string() + "\" --scenes 4 --seed 42", log) == 0);
    CHECK(read_text(log).find("generated 4 scenes") != std::string::npos);
    CHECK(fs::exists(scenes / "scene_0003.json"));

    for (const char* method : {"volume", "late_fusion"}) {
      REQUIRE(run("evaluate \"" + scenes.string() + "\" --out \"" + out.string() + "\" --method " + method, log) == 0);
      REQUIRE(run("evaluate \"" + scenes.string() + "\" --out \"" + again.string() + "\" --method " + method, log) ==
              0);
      const std::string csv = std::string("results_") + method + ".csv";
      CHECK(read_text(out / csv) == read_text(again / csv));
      CHECK(fs::exists(out / (std::string("summary_") + method + ".json")));
    }
    CHECK(read_text(out / "summary_volume.json").find("\"success_rate\": 1.0") != std::string::npos);

    const fs::path report = dir.path / "report.csv";
    REQUIRE(run("report \"" + (out / "results_volume.csv").string() + "\" \"" + (out / "results_late_fusion.csv").string() +
                    "\" --out \"" + report.string() + "\"",
                log) == 0);
    const std::string r = read_text(report);
    CHECK(r.rfind("method,bin_lo,bin_hi,total,successes,accuracy\n", 0) == 0);
    CHECK(r.find("late_fusion,0.000,0.200,4,") != std::string::npos);
  }

  TEST_CASE("generation is byte-identical across runs") {
    TempDir dir("posevolume_cli_repeat");
    const fs::path a = dir.path / "a", b = dir.path / "b", log = dir.path / "log.txt";
    fs::create_directories(a);
    fs::create_directories(b);
    const std::string cfg = (dir.path / "gen.json").string();
    posevolume::io::write_text(cfg, R"({"scenes": 10, "seed": 42, "occlusion_sweep": true, "noise_px": 1.0})");
    REQUIRE(run("generate --config \"" + cfg + "\" --out \"" + a.string() + "\"", log) == 0);
    CHECK(read_text(log).find("0.10:2 0.30:2 0.50:2 0.70:2 0.90:2") != std::string::npos);
    REQUIRE(run("generate --config \"" + cfg + "\" --out \"" + b.string() + "\"", log) == 0);
    int files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      CHECK(read_text(entry.path()) == read_text(b / entry.path().filename()));
      ++files;
    }
    CHECK(files == 10);
  }

  TEST_CASE("usage and input errors exit nonzero") {
    TempDir dir("posevolume_cli_errors");
    const fs::path log = dir.path / "log.txt";
    CHECK(run("", log) != 0);
    CHECK(run("evaluate \"" + dir.path.string() + "\" --out \"" + dir.path.string() + "\" --method bogus", log) != 0);

    CHECK(run("generate --out /nonexistent/posevolume_cli", log) != 0);
    CHECK(read_text(log).find("/nonexistent/posevolume_cli") != std::string::npos);

    const std::string bad = (dir.path / "bad.json").string();
    posevolume::io::write_text(bad, "{\n  \"scenes\": 3,\n  \"bogus\": 1\n}\n");
    CHECK(run("generate --config \"" + bad + "\" --out \"" + dir.path.string() + "\"", log) != 0);
    CHECK(read_text(log).find("bogus") != std::string::npos);

    posevolume::io::write_text(bad, "{\n  \"scenes\": ,\n}\n");
    CHECK(run("generate --config \"" + bad + "\" --out \"" + dir.path.string() + "\"", log) != 0);
    CHECK(read_text(log).find("line 2") != std::string::npos);

    // An empty scene directory has nothing to evaluate.
    const fs::path empty = dir.path / "empty";
    fs::create_directories(empty);
    CHECK(run("evaluate \"" + empty.string() + "\" --out \"" + dir.path.string() + "\"", log) != 0);
  }
}

#endif
