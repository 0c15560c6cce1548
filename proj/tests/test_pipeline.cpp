#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "posevolume/benchmark.hpp"
#include "posevolume/error.hpp"
#include "posevolume/pipeline.hpp"

using namespace posevolume;

namespace {

SyntheticCase scene_case(const std::string& model, std::uint64_t seed, double noise = 0.0, double outliers = 0.0,
                         double baseline = 0.168) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.noise_px = noise;
  cfg.outlier_rate = outliers;
  cfg.baseline_m = baseline;
  return make_case(cfg, make_builtin_model(model));
}

FeatureMap mask_only(int w, int h) {
  FeatureMap m(w, h, 1);
  return m;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("initial guess from a single mask pixel") {
    const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
    FeatureMap m = mask_only(640, 480);
    m.mask_at(320, 240) = 1.0f;
    const Vec3 g = initial_guess(m, k, 0.8);
    CHECK((g - Vec3(0, 0, 0.8)).norm() < 1e-12);

    // World differs from the reference camera: the guess moves with it.
    const RigidTransform ref_from_world(rot_y(0.3), {0.1, 0.0, 0.0});
    const Vec3 w = initial_guess(m, k, 0.8, ref_from_world);
    CHECK((ref_from_world.apply(w) - Vec3(0, 0, 0.8)).norm() < 1e-12);
  }

  TEST_CASE("initial guess from a symmetric square mask") {
    const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
    FeatureMap m = mask_only(640, 480);
    for (int v = 100; v <= 140; ++v) {
      for (int u = 400; u <= 440; ++u) m.mask_at(u, v) = 1.0f;
    }
    const Vec3 g = initial_guess(m, k, 1.0);
    CHECK(g.x() == doctest::Approx((420 - 320) / 500.0));
    CHECK(g.y() == doctest::Approx((120 - 240) / 500.0));
    CHECK(g.z() == doctest::Approx(1.0));

    // Masks at a reduced resolution are addressed through scaled intrinsics.
    FeatureMap q = mask_only(160, 120);
    q.mask_at(105, 30) = 1.0f;
    const Vec3 gq = initial_guess(q, k, 1.0);
    const CameraIntrinsics kq = k.scaled_to(160, 120);
    CHECK(gq.x() == doctest::Approx((105 - kq.cx) / kq.fx));
  }

  TEST_CASE("empty masks are rejected") {
    const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
    try {
      initial_guess(mask_only(640, 480), k, 0.8);
      FAIL("expected EmptyMask");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyMask);
    }
  }

  TEST_CASE("initial guesses land near the object") {
    int near = 0;
    const int n = 200;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> prior(-0.2, 0.2);
    const ModelPoints ape = make_builtin_model("ape");
    for (int s = 0; s < n; ++s) {
      SynthConfig cfg;
      cfg.seed = derive_seed(31, s);
      const SyntheticCase c = make_case(cfg, ape);
      const double depth = c.scene.object_pose.translation().z() + prior(rng);
      const Vec3 g = initial_guess(c.features.ref.front(), c.scene.pair.intrinsics(), depth);
      near += (g - c.scene.object_pose.translation()).norm() < 0.25;
    }
    CHECK(near >= 0.95 * n);
  }

  TEST_CASE("tap gains pick out the keypoint channels") {
    GridSpec g;
    g.dims = {2, 1, 1};
    GeometricVolume v{g, 4, {1, 2, 3, 4, 0, 0, 0, 0}};
    // Two keypoints, two taps: channel c -> keypoint c % 2, tap c / 2.
    const std::vector<double> gains{1.0, 0.5};
    const auto fields = keypoint_fields(v, 2, gains);
    REQUIRE(fields.size() == 2);
    const double logit0 = 1.0 + 0.5 * 3.0;
    const double p0 = std::exp(logit0) / (std::exp(logit0) + 1.0);
    CHECK(fields[0].values[0] == doctest::Approx(p0));
    const double logit1 = 2.0 + 0.5 * 4.0;
    CHECK(fields[1].values[0] == doctest::Approx(std::exp(logit1) / (std::exp(logit1) + 1.0)));
    CHECK_THROWS_AS(keypoint_fields(v, 3, gains), Error);
  }

  TEST_CASE("config validation") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.fine_cell = 0.02;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.coarse_half_range.y() = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.coarse_tap_gains.clear();
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.fine_tap_gains = {1.0, -1.0};
    CHECK_THROWS_AS(cfg.validate(), Error);
  }

  TEST_CASE("all-zero features give uniform fields and low confidence") {
    const SyntheticCase c = scene_case("ape", 40);
    ViewFeatures ref = c.features.ref;
    ViewFeatures query = c.features.query;
    for (auto* view : {&ref, &query}) {
      for (FeatureMap& m : *view) std::fill(m.data.begin(), m.data.end(), 0.0f);
    }
    const SceneInputs in{c.scene.pair, ref, query, c.keypoints, c.model.diameter, 0.8, std::nullopt};
    const Vec3 center = c.scene.object_pose.translation();
    const PipelineConfig cfg;
    const std::vector<double> gains{5.0, 5.0};
    // Every keypoint reads out the grid center, so the solver sees a collapsed configuration.
    try {
      const LevelResult r = run_level(center, 0.01, Vec3::Constant(0.1), in, cfg, gains);
      CHECK(r.diagnostics.low_confidence == 9);
      for (const auto& k : r.keypoints) {
        CHECK((k.position - r.grid.center).norm() < 1e-12);
        CHECK(k.low_confidence);
      }
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateConfiguration);
    }
  }

  TEST_CASE("noise-free coarse level stays within a cell diagonal") {
    const double diag = std::sqrt(3.0) * 0.01;
    for (const std::string model : {"ape", "cube", "cylinder"}) {
      for (int s = 0; s < 12; ++s) {
        const SyntheticCase c = scene_case(model, derive_seed(21, s));
        const CaseEvaluation e = evaluate_case(c, Method::Volume);
        REQUIRE(e.coarse.has_value());
        const double err = c.model.symmetric ? e.coarse->adds : e.coarse->add;
        CHECK_MESSAGE(err < diag, model << " scene " << s << " coarse error " << err);
        CHECK(e.final.success);
      }
    }
  }

  TEST_CASE("coarse-to-fine refines every noise-free scene") {
    std::vector<double> fine;
    for (int s = 0; s < 15; ++s) {
      const SyntheticCase c = scene_case("ape", derive_seed(22, s));
      const CaseEvaluation e = evaluate_case(c, Method::Volume);
      CHECK(e.final.keypoint_error < e.coarse->keypoint_error);
      fine.push_back(e.final.keypoint_error);
    }
    // Individual keypoints can drift further along the depth direction.
    CHECK(median(fine) < 0.005);
  }

  TEST_CASE("coarse-to-fine diagnostics and determinism") {
    const SyntheticCase c = scene_case("ape", 50, 1.0, 0.1);
    const PipelineConfig cfg;
    const CoarseToFineResult a = run_coarse_to_fine(cfg, c.inputs());
    const CoarseToFineResult b = run_coarse_to_fine(cfg, c.inputs());
    CHECK(a.pose().rotation() == b.pose().rotation());
    CHECK(a.pose().translation() == b.pose().translation());
    CHECK(a.coarse.grid.dims == std::array<int, 3>{60, 60, 60});
    CHECK(a.fine.grid.cell_size.x() == 0.005);
    CHECK((a.fine.grid.center - a.coarse.pose.apply(c.keypoints.front())).norm() < 1e-12);
    REQUIRE(a.joint_loss.has_value());
    CHECK(*a.joint_loss >= 0.0);
    for (const LevelResult* level : {&a.coarse, &a.fine}) {
      REQUIRE(level->diagnostics.kl.has_value());
      CHECK(*level->diagnostics.kl >= 0.0);
      CHECK(level->diagnostics.keypoint_loss.has_value());
      CHECK(level->diagnostics.pose_loss.has_value());
    }
    const double expected = *a.coarse.diagnostics.pose_loss + *a.coarse.diagnostics.keypoint_loss +
                            *a.coarse.diagnostics.kl + *a.fine.diagnostics.pose_loss +
                            *a.fine.diagnostics.keypoint_loss + *a.fine.diagnostics.kl;
    CHECK(*a.joint_loss == doctest::Approx(expected));

    SceneInputs blind = c.inputs();
    blind.ground_truth.reset();
    const CoarseToFineResult d = run_coarse_to_fine(cfg, blind);
    CHECK_FALSE(d.joint_loss.has_value());
    CHECK_FALSE(d.fine.diagnostics.kl.has_value());
    CHECK(d.pose().translation() == a.pose().translation());
  }

  TEST_CASE("a displaced initial guess is recovered") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    int ok = 0;
    const int trials = 20;
    for (int s = 0; s < trials; ++s) {
      const SyntheticCase c = scene_case("ape", derive_seed(23, s));
      Vec3 dir(n(rng), n(rng), n(rng));
      dir.normalize();
      const Vec3 start = c.scene.object_pose.translation() + 0.2 * dir;
      ok += evaluate_case(c, Method::Volume, {}, start).final.success;
    }
    CHECK(ok >= 0.9 * trials);
  }

  TEST_CASE("the least-squares variant runs through the same levels") {
    const SyntheticCase c = scene_case("cube", 51);
    const CaseEvaluation e = evaluate_case(c, Method::KabschAll);
    CHECK(e.final.success);
    REQUIRE(e.coarse.has_value());
  }

  TEST_CASE("2D extraction of a rendered response") {
    FeatureMap m(64, 48, 2);
    const double cu = 20.3, cv = 17.8;
    for (int v = 0; v < 48; ++v) {
      for (int u = 0; u < 64; ++u) {
        const double d2 = (u - cu) * (u - cu) + (v - cv) * (v - cv);
        m.pixel(u, v)[1] = static_cast<float>(std::exp(-d2 / 18.0));
      }
    }
    const Vec2 p = extract_keypoint_2d(m, 1);
    CHECK(p.x() == doctest::Approx(cu).epsilon(1e-5));
    CHECK(p.y() == doctest::Approx(cv).epsilon(1e-5));
    CHECK_THROWS_AS(extract_keypoint_2d(m, 2), Error);
  }

  TEST_CASE("late fusion is exact on noise-free wide-baseline scenes") {
    for (int s = 0; s < 5; ++s) {
      const SyntheticCase c = scene_case("ape", derive_seed(24, s), 0.0, 0.0, 0.3);
      const LateFusionResult r = run_late_fusion(c.inputs());
      CHECK(r.indices.size() == 9);
      CHECK(add_metric(r.pose, c.scene.object_pose, c.model) < 1e-6);
      CHECK(rotation_angle_between(r.pose.rotation(), c.scene.object_pose.rotation()) < 1e-6);
    }
  }

  TEST_CASE("late fusion without a baseline has nothing to triangulate") {
    const SyntheticCase c = scene_case("ape", 25, 0.0, 0.0, 0.0);
    try {
      run_late_fusion(c.inputs());
      FAIL("expected TooFewPoints");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TooFewPoints);
    }
    // The benchmark driver scores it as a failure instead of aborting.
    const CaseEvaluation e = evaluate_case(c, Method::LateFusion);
    CHECK(e.final.failed);
    CHECK_FALSE(e.final.success);
  }

  TEST_CASE("late fusion degrades faster than the volume at a short baseline") {
    std::vector<double> vol, late;
    for (int s = 0; s < 20; ++s) {
      const SyntheticCase c = scene_case("ape", derive_seed(11, s), 1.0, 0.0, 0.02);
      vol.push_back(evaluate_case(c, Method::Volume).final.keypoint_error);
      late.push_back(evaluate_case(c, Method::LateFusion).final.keypoint_error);
    }
    MESSAGE("median keypoint error: volume " << median(vol) << " m, late fusion " << median(late) << " m");
    CHECK(median(late) > median(vol));
  }

  TEST_CASE("mean keypoint error") {
    const std::vector<Vec3> model{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    const RigidTransform gt(Mat3::Identity(), {0, 0, 1});
    const std::vector<Vec3> est{{0, 0, 1.1}, {0, 1, 1.3}};
    const std::vector<int> idx{0, 2};
    CHECK(mean_keypoint_error(est, idx, model, gt) == doctest::Approx(0.2));
    const std::vector<int> bad{0};
    CHECK_THROWS_AS(mean_keypoint_error(est, bad, model, gt), Error);
  }
}
