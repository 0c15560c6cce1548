#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posevolume/geometry.hpp"

namespace posevolume {

/// Object model point cloud, model frame, meters.
struct ModelPoints {
  std::vector<Vec3> points;
  double diameter = 0.0;
  bool symmetric = false;

  /// Builds a model and computes its diameter as the largest pairwise distance.
  static ModelPoints from_points(std::vector<Vec3> points, bool symmetric);
  Vec3 centroid() const;
};

double model_diameter(std::span<const Vec3> points);

/// Mean distance between corresponding model points under the two poses.
double add_metric(const RigidTransform& est, const RigidTransform& gt, const ModelPoints& model);

/// Above this many points, ADD-S switches from brute force to a uniform
/// grid nearest-neighbor search.
inline constexpr std::size_t kBruteForceNearestLimit = 5000;

/// Mean distance from each estimated point to its closest ground-truth point.
double adds_metric(const RigidTransform& est, const RigidTransform& gt, const ModelPoints& model);

/// ADD-S for symmetric models, ADD otherwise, against 10% of the diameter.
bool success(const RigidTransform& est, const RigidTransform& gt, const ModelPoints& model);

/// Exact nearest neighbour queries over a fixed point set.
class NearestNeighbors {
 public:
  explicit NearestNeighbors(std::vector<Vec3> points);
  /// Distance from q to the closest stored point.
  double distance(const Vec3& q) const;

 private:
  std::vector<Vec3> points_;
  bool use_grid_ = false;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

struct OcclusionSample {
  bool success = false;
  double invisible_fraction = 0.0;
};

struct OcclusionBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t total = 0;
  std::size_t successes = 0;
  /// Absent when the bin received no samples.
  std::optional<double> accuracy;
};

/// Bins samples by invisible fraction using consecutive edges; each bin is
/// [lo, hi) except the last, which also includes hi.
std::vector<OcclusionBin> occlusion_curve(std::span<const OcclusionSample> samples,
                                          std::span<const double> edges);

/// Least-squares slope of accuracy against bin center over non-empty bins.
double accuracy_slope(std::span<const OcclusionBin> bins);

/// One results CSV row.
struct ResultRow {
  std::string scene_id;
  std::string method;
  double add = 0.0;
  double adds = 0.0;
  bool success = false;
  double invisible_fraction = 0.0;
};

inline constexpr const char* kResultsCsvVersion = "# posevolume-results v1";
inline constexpr const char* kResultsCsvHeader = "scene_id,method,add,adds,success,invisible_fraction";

std::string format_results_csv(std::span<const ResultRow> rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

}  // namespace posevolume
