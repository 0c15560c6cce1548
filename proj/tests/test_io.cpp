#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <random>
#include <string>

#include "posevolume/error.hpp"
#include "posevolume/io.hpp"
#include "test_util.hpp"

using namespace posevolume;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("generate config parsing") {
    const io::GenerateConfig d = io::parse_generate_config("{}");
    CHECK(d.scenes == 10);
    CHECK(d.model == "ape");
    CHECK(d.synth.baseline_m == 0.168);

    const io::GenerateConfig c = io::parse_generate_config(
        R"({"seed": 7, "scenes": 3, "model": "cube", "model_symmetric": true, "noise_px": 1.5,
            "occlusion_sweep": true, "occlusion_levels": [0.2, 0.4], "dump_features": true})");
    CHECK(c.synth.seed == 7);
    CHECK(c.scenes == 3);
    CHECK(c.model == "cube");
    CHECK(c.model_symmetric);
    CHECK(c.synth.noise_px == 1.5);
    CHECK(c.occlusion_levels == std::vector<double>{0.2, 0.4});
    CHECK(c.dump_features);

    const io::GenerateConfig back = io::parse_generate_config(io::generate_config_to_json(c));
    CHECK(io::generate_config_to_json(back) == io::generate_config_to_json(c));
  }

  TEST_CASE("config errors name the field or the position") {
    CHECK(code_of([] { io::parse_generate_config(R"({"bogus": 1})"); }) == ErrorCode::ConfigParseError);
    CHECK(message_of([] { io::parse_generate_config(R"({"bogus": 1})"); }).find("bogus") != std::string::npos);
    CHECK(message_of([] { io::parse_generate_config(R"({"scenes": "ten"})"); }).find("scenes") !=
          std::string::npos);
    const std::string syntax = message_of([] { io::parse_generate_config("{\n  \"scenes\": ,\n}"); });
    CHECK(syntax.find("line 2") != std::string::npos);
    CHECK(code_of([] { io::parse_generate_config("[1, 2]"); }) == ErrorCode::ConfigParseError);
    CHECK(code_of([] { io::parse_generate_config(R"({"outlier_rate": 2.0})"); }) == ErrorCode::ConfigParseError);
    CHECK(code_of([] { io::parse_generate_config(R"({"scenes": 0})"); }) == ErrorCode::ConfigParseError);
  }

  TEST_CASE("pipeline config parsing") {
    const PipelineConfig c = io::parse_pipeline_config(
        R"({"coarse_cell_m": 0.02, "fine_cell_m": 0.004, "coarse_half_range_m": [0.2, 0.25, 0.3],
            "coarse_tap_gains": [3, 4], "gamma2_m": 0.03, "beta3": 0.5})");
    CHECK(c.coarse_cell == 0.02);
    CHECK(c.fine_cell == 0.004);
    CHECK(c.coarse_half_range == Vec3(0.2, 0.25, 0.3));
    CHECK(c.coarse_tap_gains == std::vector<double>{3, 4});
    CHECK(c.solver.gamma2 == 0.03);
    CHECK(c.betas.beta3 == 0.5);
    const PipelineConfig back = io::parse_pipeline_config(io::pipeline_config_to_json(c));
    CHECK(io::pipeline_config_to_json(back) == io::pipeline_config_to_json(c));

    CHECK(code_of([] { io::parse_pipeline_config(R"({"fine_cell_m": 0.05})"); }) == ErrorCode::ConfigParseError);
    CHECK(code_of([] { io::parse_pipeline_config(R"({"coarse_half_range_m": [1, 2]})"); }) ==
          ErrorCode::ConfigParseError);
    CHECK(code_of([] { io::parse_pipeline_config(R"({"coarse_cell": 0.01})"); }) == ErrorCode::ConfigParseError);
  }

  TEST_CASE("pose and intrinsics JSON round trip") {
    std::mt19937_64 rng(60);
    for (int i = 0; i < 50; ++i) {
      const RigidTransform t = test::random_transform(rng);
      const RigidTransform back = io::pose_from_json(io::pose_to_json(t));
      CHECK(back.rotation() == t.rotation());
      CHECK(back.translation() == t.translation());
    }
    const CameraIntrinsics k{572.4114, 573.57043, 325.2611, 242.04899, 640, 480};
    const CameraIntrinsics kb = io::intrinsics_from_json(io::intrinsics_to_json(k));
    CHECK(kb.fx == k.fx);
    CHECK(kb.cy == k.cy);
    CHECK(kb.height == 480);
    CHECK(code_of([] { io::pose_from_json(R"({"R": [1, 0, 0], "t": [0, 0, 0]})"); }) == ErrorCode::SchemaMismatch);
    CHECK(code_of([] { io::pose_from_json(R"({"R": [2,0,0,0,1,0,0,0,1], "t": [0,0,0]})"); }) ==
          ErrorCode::SchemaMismatch);
  }

  TEST_CASE("scene manifest round trip") {
    const ModelPoints ape = make_builtin_model("ape");
    SynthConfig cfg;
    cfg.seed = 1234;
    cfg.occlusion_fraction = 0.3;
    cfg.noise_px = 0.5;
    const Scene s = generate_scene(cfg, ape);
    io::SceneManifest m = io::make_manifest("scene_0007", "ape", false, cfg, s);
    m.feature_dumps = {"a.bin", "b.bin"};
    const std::string text = io::manifest_to_json(m);
    const io::SceneManifest back = io::manifest_from_json(text);
    CHECK(back.scene_id == "scene_0007");
    CHECK(back.synth.seed == 1234);
    CHECK(back.synth.noise_px == 0.5);
    CHECK(back.object_pose.rotation() == s.object_pose.rotation());
    CHECK(back.query_from_world.translation() == s.pair.query_from_world().translation());
    CHECK(back.occluder.u0 == s.occluder.u0);
    CHECK(back.occluder.v1 == s.occluder.v1);
    CHECK(back.invisible_fraction == s.invisible_fraction);
    CHECK(back.feature_dumps == m.feature_dumps);
    CHECK(io::manifest_to_json(back) == text);

    const Scene rebuilt = back.scene();
    CHECK(rebuilt.pair.baseline_m() == s.pair.baseline_m());

    // An empty occluder survives as null.
    SynthConfig clear = cfg;
    clear.occlusion_fraction = 0.0;
    const Scene c = generate_scene(clear, ape);
    CHECK(io::manifest_from_json(io::manifest_to_json(io::make_manifest("x", "ape", false, clear, c))).occluder.empty());
  }

  TEST_CASE("malformed manifests are schema mismatches") {
    const ModelPoints ape = make_builtin_model("ape");
    SynthConfig cfg;
    const Scene s = generate_scene(cfg, ape);
    const std::string good = io::manifest_to_json(io::make_manifest("scene_0000", "ape", false, cfg, s));
    CHECK(code_of([] { io::manifest_from_json("{}"); }) == ErrorCode::SchemaMismatch);
    CHECK(code_of([] { io::manifest_from_json("not json"); }) == ErrorCode::SchemaMismatch);
    for (const std::string key : {"\"object_pose\"", "\"intrinsics\"", "\"scene_id\"", "\"config\""}) {
      std::string bad = good;
      const auto at = bad.find(key);
      REQUIRE(at != std::string::npos);
      bad.replace(at, key.size(), "\"renamed\"");
      CHECK(code_of([&] { io::manifest_from_json(bad); }) == ErrorCode::SchemaMismatch);
    }
    std::string v2 = good;
    v2.replace(v2.find("\"version\": 1"), 12, "\"version\": 2");
    CHECK(code_of([&] { io::manifest_from_json(v2); }) == ErrorCode::SchemaMismatch);
  }

  TEST_CASE("volume dump round trip") {
    TempDir dir("posevolume_io_volume");
    GeometricVolume v;
    v.spec = build_grid({0.1, -0.2, 0.8}, Vec3::Constant(0.02), 0.01);
    v.channels = 3;
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    v.values.resize(v.spec.cell_count() * 3);
    for (float& x : v.values) x = u(rng);
    io::write_volume(dir.path / "v.bin", v);
    const GeometricVolume back = io::read_volume(dir.path / "v.bin");
    CHECK(back.spec == v.spec);
    CHECK(back.channels == 3);
    CHECK(back.values == v.values);

    ScalarGrid g{v.spec, std::vector<double>(v.spec.cell_count(), 0.25)};
    io::write_scalar_grid(dir.path / "g.bin", g);
    const GeometricVolume gb = io::read_volume(dir.path / "g.bin");
    CHECK(gb.channels == 1);
    CHECK(gb.values.front() == 0.25f);

    // Truncated payloads are detected.
    const auto size = fs::file_size(dir.path / "v.bin");
    fs::resize_file(dir.path / "v.bin", size - 8);
    CHECK(code_of([&] { io::read_volume(dir.path / "v.bin"); }) == ErrorCode::SchemaMismatch);
    CHECK(code_of([&] { io::read_volume(dir.path / "missing.bin"); }) == ErrorCode::IoError);
  }

  TEST_CASE("feature map dump round trip") {
    TempDir dir("posevolume_io_features");
    FeatureMap m(17, 9, 4);
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& x : m.data) x = u(rng);
    for (float& x : m.mask) x = u(rng) > 0.5f ? 1.0f : 0.0f;
    io::write_feature_map(dir.path / "f.bin", m);
    const FeatureMap back = io::read_feature_map(dir.path / "f.bin");
    CHECK(back.width == 17);
    CHECK(back.height == 9);
    CHECK(back.channels == 4);
    CHECK(back.data == m.data);
    CHECK(back.mask == m.mask);
    // A volume file is not a feature map.
    GeometricVolume v{build_grid({0, 0, 0}, Vec3::Constant(0.01), 0.01), 1, {}};
    v.values.assign(v.spec.cell_count(), 0.0f);
    io::write_volume(dir.path / "v.bin", v);
    CHECK(code_of([&] { io::read_feature_map(dir.path / "v.bin"); }) == ErrorCode::SchemaMismatch);
  }

  TEST_CASE("model loading by name or path") {
    TempDir dir("posevolume_io_model");
    CHECK(io::load_model("cube", false).points == make_builtin_model("cube").points);
    {
      std::ofstream out(dir.path / "tri.ply");
      out << "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
             "end_header\n0 0 0\n0.1 0 0\n0 0.1 0\n";
    }
    const ModelPoints m = io::load_model((dir.path / "tri.ply").string(), true);
    CHECK(m.points.size() == 3);
    CHECK(m.symmetric);
    CHECK(m.diameter == doctest::Approx(0.1 * std::sqrt(2.0)));
    CHECK(code_of([&] { io::load_model((dir.path / "none.ply").string(), false); }) == ErrorCode::IoError);
  }

  TEST_CASE("text helpers") {
    TempDir dir("posevolume_io_text");
    io::write_text(dir.path / "a.txt", "hello\n");
    CHECK(io::read_text(dir.path / "a.txt") == "hello\n");
    CHECK(code_of([&] { io::read_text(dir.path / "nope.txt"); }) == ErrorCode::IoError);
    CHECK(code_of([&] { io::write_text(dir.path / "no" / "such" / "dir.txt", "x"); }) == ErrorCode::IoError);
  }
}
