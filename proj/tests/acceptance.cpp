// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "posevolume/benchmark.hpp"
#include "posevolume/field.hpp"
#include "posevolume/geometry.hpp"
#include "posevolume/runner.hpp"
#include "posevolume/solver.hpp"
#include "posevolume/volume.hpp"
#include "test_util.hpp"

using namespace posevolume;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome geometry_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const CameraIntrinsics k = default_intrinsics();
  std::uniform_real_distribution<double> u(0.0, k.width - 1.0), v(0.0, k.height - 1.0), z(0.2, 3.0);
  double worst_round = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = unproject_pixel(u(rng), v(rng), z(rng), k);
    const PixelDepth q = project_point(p, k);
    worst_round = std::max(worst_round, (unproject_pixel(q.u, q.v, q.z, k) - p).norm());
  }
  double worst_tri = 0.0;
  std::uniform_real_distribution<double> yaw(-0.3, 0.3);
  for (int i = 0; i < 1000; ++i) {
    const RigidTransform query(rot_y(yaw(rng)), test::random_vec(rng, -0.2, 0.2));
    const ViewPair pair(k, RigidTransform::identity(), query);
    if (pair.baseline_m() < 0.01) continue;
    const Vec3 p(std::uniform_real_distribution<double>(-0.1, 0.1)(rng),
                 std::uniform_real_distribution<double>(-0.1, 0.1)(rng), z(rng) * 0.5 + 0.5);
    const PixelDepth a = project_point(p, k);
    const PixelDepth b = project_point(query.apply(p), k);
    if (b.z <= 0.0) continue;
    worst_tri = std::max(worst_tri, (triangulate({a.u, a.v}, {b.u, b.v}, pair) - p).norm());
  }
  const double t = seconds_since(t0);
  return {worst_round < 1e-12 && worst_tri < 1e-9 && t < 1.0,
          fmt("round-trip max %.2e m, triangulation max %.2e m, %.3f s", worst_round, worst_tri, t)};
}

Outcome kabsch_equivalence() {
  std::mt19937_64 rng(102);
  double worst_r = 0.0, worst_t = 0.0;
  std::uniform_int_distribution<int> count(3, 30);
  for (int i = 0; i < 500; ++i) {
    const RigidTransform gt = test::random_transform(rng);
    std::vector<Vec3> model, scene;
    const int n = count(rng);
    for (int j = 0; j < n; ++j) {
      model.push_back(test::random_vec(rng, -0.1, 0.1));
      scene.push_back(gt.apply(model.back()));
    }
    const RigidTransform est = kabsch_align(model, scene);
    worst_r = std::max(worst_r, (est.rotation() - gt.rotation()).norm());
    worst_t = std::max(worst_t, (est.translation() - gt.translation()).norm());
  }
  return {worst_r < 1e-9 && worst_t < 1e-9, fmt("rotation max %.2e, translation max %.2e m", worst_r, worst_t)};
}

ScalarGrid random_field(const GridSpec& g, std::mt19937_64& rng, double spread) {
  std::normal_distribution<double> n(0.0, spread);
  ScalarGrid raw{g, std::vector<double>(g.cell_count())};
  for (double& x : raw.values) x = n(rng);
  return normalize_field(raw);
}

Outcome field_properties() {
  std::mt19937_64 rng(103);
  const GridSpec g = build_grid({0, 0, 0.8}, Vec3::Constant(0.05), 0.01);
  bool self_zero = true, nonneg = true;
  double worst_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ScalarGrid a = random_field(g, rng, 1.0 + i % 7);
    const ScalarGrid b = random_field(g, rng, 1.0 + i % 5);
    self_zero = self_zero && kl_divergence(a, a) == 0.0;
    nonneg = nonneg && kl_divergence(a, b) >= 0.0;
    double sum = 0.0;
    for (double x : a.values) sum += x;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  double worst_unity = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p = g.center + test::random_vec(rng, -0.045, 0.045);
    const TrilinearStencil s = trilinear_stencil(g, p);
    if (!s.inside) continue;
    double w = 0.0;
    for (double x : s.weights) w += x;
    worst_unity = std::max(worst_unity, std::abs(w - 1.0));
  }
  return {self_zero && nonneg && worst_sum <= 1e-6 && worst_unity <= 1e-15,
          fmt("KL(Q||Q)=0 %s, KL>=0 %s, max |sum-1| %.2e, max |weights-1| %.2e", self_zero ? "yes" : "no",
              nonneg ? "yes" : "no", worst_sum, worst_unity)};
}

Outcome keypoint_round_trip() {
  std::mt19937_64 rng(104);
  const double cell = 0.01;
  const GridSpec g = build_grid({0, 0, 0.8}, Vec3::Constant(0.2), cell);
  std::vector<double> errors;
  for (int i = 0; i < 500; ++i) {
    const Vec3 k = g.center + test::random_vec(rng, -0.12, 0.12);
    const TargetHeatmaps t = TargetHeatmaps::with_uniform_sigma({k}, RigidTransform::identity(), 2.0 * cell);
    errors.push_back((extract_keypoint(rasterize_heatmap(t, g, 0)).position - k).norm());
  }
  const double med = median(errors);
  return {med < cell / 4.0, fmt("median error %.2e m (bound %.2e m)", med, cell / 4.0)};
}

Outcome soft_ransac_robustness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(105);
  const std::vector<Vec3> keypoints = select_keypoints(make_builtin_model("ape"), 9);
  std::normal_distribution<double> noise(0.0, 0.002), n(0.0, 1.0);
  std::vector<int> order(9);
  int wins = 0;
  const int trials = 500;
  std::vector<double> rot_err, trans_err;
  for (int trial = 0; trial < trials; ++trial) {
    const RigidTransform gt(test::random_rotation(rng), Vec3(0, 0, 0.8) + test::random_vec(rng, -0.1, 0.1));
    Correspondences c;
    for (const Vec3& m : keypoints) {
      c.model.push_back(m);
      c.scene.push_back(gt.apply(m) + Vec3(noise(rng), noise(rng), noise(rng)));
    }
    for (int i = 0; i < 9; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int j = 0; j < 2; ++j) {
      Vec3 dir(n(rng), n(rng), n(rng));
      c.scene[order[j]] += 0.2 * dir.normalized();
    }
    const RigidTransform robust = solve(c).pose;
    const RigidTransform plain = kabsch_align(c.model, c.scene);
    wins += pose_loss(robust, gt, 1.0) < pose_loss(plain, gt, 1.0);
    rot_err.push_back(rotation_angle_between(robust.rotation(), gt.rotation()) * 180.0 / std::numbers::pi);
    trans_err.push_back((robust.translation() - gt.translation()).norm());
  }
  const double t = seconds_since(t0);
  const double rate = static_cast<double>(wins) / trials;
  const double rot = median(rot_err), trans = median(trans_err);
  return {rate >= 0.95 && rot < 2.0 && trans < 0.005 && t < 5.0,
          fmt("beats Kabsch in %.1f%%, median rotation %.3f deg, median translation %.2f mm, %.2f s", 100.0 * rate,
              rot, trans * 1000.0, t)};
}

Outcome coarse_to_fine_direction() {
  const auto t0 = Clock::now();
  const ModelPoints ape = make_builtin_model("ape");
  std::vector<double> coarse_add, fine_add;
  int coarse_ok = 0, fine_ok = 0;
  const int n = 200;
  for (int s = 0; s < n; ++s) {
    SynthConfig cfg;
    cfg.seed = derive_seed(106, s);
    cfg.noise_px = 2.0;
    cfg.outlier_rate = 0.1;
    const CaseEvaluation e = evaluate_case(make_case(cfg, ape), Method::Volume);
    coarse_add.push_back(e.coarse->add);
    fine_add.push_back(e.final.add);
    coarse_ok += e.coarse->success;
    fine_ok += e.final.success;
  }
  const double t = seconds_since(t0);
  const double mc = median(coarse_add), mf = median(fine_add);
  const double gain = 100.0 * (fine_ok - coarse_ok) / n;
  return {mf < mc && gain >= 3.0 && t < 300.0,
          fmt("median ADD coarse %.6f m, fine %.6f m; success coarse %.1f%%, fine %.1f%% (+%.1f points), %.0f s", mc, mf,
              100.0 * coarse_ok / n, 100.0 * fine_ok / n, gain, t)};
}

Outcome early_vs_late_fusion() {
  const auto t0 = Clock::now();
  const ModelPoints ape = make_builtin_model("ape");
  const std::vector<double> baselines{0.004, 0.05, 0.168};
  std::vector<double> gaps;
  bool every = true;
  std::string detail;
  for (double b : baselines) {
    std::vector<double> vol, late;
    for (int s = 0; s < 60; ++s) {
      SynthConfig cfg;
      cfg.seed = derive_seed(107, s);
      cfg.noise_px = 1.0;
      cfg.baseline_m = b;
      const SyntheticCase c = make_case(cfg, ape);
      vol.push_back(evaluate_case(c, Method::Volume).final.keypoint_error);
      late.push_back(evaluate_case(c, Method::LateFusion).final.keypoint_error);
    }
    const double mv = median(vol), ml = median(late);
    every = every && mv <= ml;
    gaps.push_back(ml - mv);
    detail += fmt("b=%.3f volume %.4f late %.4f; ", b, mv, ml);
  }
  const bool widest = gaps[0] > gaps[1] && gaps[0] > gaps[2];
  const double t = seconds_since(t0);
  detail += fmt("gap widest at 0.004: %s, %.0f s", widest ? "yes" : "no", t);
  return {every && widest && t < 600.0, detail};
}

Outcome occlusion_robustness() {
  const ModelPoints ape = make_builtin_model("ape");
  std::vector<OcclusionSample> vol, late;
  const int n = 240;
  for (int s = 0; s < n; ++s) {
    SynthConfig cfg;
    cfg.seed = derive_seed(108, s);
    cfg.noise_px = 1.0;
    cfg.occlusion_fraction = 0.8 * (s + 0.5) / n;
    const SyntheticCase c = make_case(cfg, ape);
    vol.push_back({evaluate_case(c, Method::Volume).final.success, c.scene.invisible_fraction});
    late.push_back({evaluate_case(c, Method::LateFusion).final.success, c.scene.invisible_fraction});
  }
  const std::vector<double> edges{0.0, 0.2, 0.4, 0.6, 0.8};
  const auto bv = occlusion_curve(vol, edges), bl = occlusion_curve(late, edges);
  const double sv = accuracy_slope(bv), sl = accuracy_slope(bl);
  std::string detail;
  for (std::size_t i = 0; i < bv.size(); ++i) {
    detail += fmt("[%.1f,%.1f] n=%zu vol %.2f late %.2f; ", bv[i].lo, bv[i].hi, bv[i].total, bv[i].accuracy.value_or(NAN),
                  bl[i].accuracy.value_or(NAN));
  }
  detail += fmt("slope volume %.3f, late fusion %.3f", sv, sl);
  return {sv > sl, detail};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "posevolume_acceptance_determinism";
  fs::remove_all(root);
  const fs::path a = root / "a", b = root / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  io::GenerateConfig cfg;
  cfg.scenes = 10;
  cfg.synth.seed = 109;
  cfg.synth.noise_px = 1.5;
  cfg.synth.outlier_rate = 0.1;
  cfg.occlusion_sweep = true;
  generate_scenes(cfg, a);
  generate_scenes(cfg, b);
  bool same = true;
  for (const fs::path& p : list_manifests(a)) same = same && io::read_text(p) == io::read_text(b / p.filename());
  const PipelineConfig pc;
  for (Method m : {Method::Volume, Method::LateFusion, Method::KabschAll}) {
    const std::string first = format_results_csv(evaluate_directory(a, m, pc, 1).rows);
    const std::string second = format_results_csv(evaluate_directory(b, m, pc, 4).rows);
    same = same && first == second;
  }
  fs::remove_all(root);
  return {same, same ? "manifests and results CSVs byte-identical across runs and thread counts"
                     : "outputs differ between runs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"geometry exactness", geometry_exactness},
      {"Kabsch oracle equivalence", kabsch_equivalence},
      {"field properties", field_properties},
      {"keypoint round trip", keypoint_round_trip},
      {"soft RANSAC robustness", soft_ransac_robustness},
      {"coarse-to-fine direction", coarse_to_fine_direction},
      {"early vs late fusion direction", early_vs_late_fusion},
      {"occlusion robustness direction", occlusion_robustness},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
