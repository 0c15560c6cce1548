#include "posevolume/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "posevolume/error.hpp"

namespace posevolume {

double ScalarGrid::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

TargetHeatmaps TargetHeatmaps::with_uniform_sigma(std::vector<Vec3> keypoints, RigidTransform pose,
                                                  double sigma) {
  TargetHeatmaps t;
  t.sigmas.assign(keypoints.size(), sigma);
  t.keypoints = std::move(keypoints);
  t.pose = std::move(pose);
  return t;
}

void TargetHeatmaps::validate() const {
  if (keypoints.size() != sigmas.size()) {
    throw Error(ErrorCode::CountMismatch, "one sigma per keypoint is required");
  }
  for (double s : sigmas) {
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "heatmap sigmas must be positive");
  }
}

ScalarGrid rasterize_heatmap(const TargetHeatmaps& target, const GridSpec& spec, std::size_t i) {
  target.validate();
  if (i >= target.keypoints.size()) {
    throw Error(ErrorCode::InvalidArgument, "keypoint index out of range");
  }
  const Vec3 mean = target.pose.apply(target.keypoints[i]);
  if (!spec.contains(mean)) {
    throw Error(ErrorCode::KeypointOutsideGrid, "posed keypoint lies outside the grid");
  }
  const double inv_two_var = 1.0 / (2.0 * target.sigmas[i] * target.sigmas[i]);

  ScalarGrid out{spec, std::vector<double>(spec.cell_count())};
  double nearest = std::numeric_limits<double>::infinity();
  for (int iz = 0; iz < spec.dims[2]; ++iz) {
    for (int iy = 0; iy < spec.dims[1]; ++iy) {
      for (int ix = 0; ix < spec.dims[0]; ++ix) {
        const double d2 = (spec.cell_center(ix, iy, iz) - mean).squaredNorm();
        out.values[spec.linear_index(ix, iy, iz)] = d2;
        nearest = std::min(nearest, d2);
      }
    }
  }
  double total = 0.0;
  for (double& v : out.values) {
    v = std::exp(-(v - nearest) * inv_two_var);
    total += v;
  }
  for (double& v : out.values) v /= total;
  return out;
}

ScalarGrid normalize_field(const ScalarGrid& raw) {
  if (raw.values.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : raw.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "field contains NaN or Inf");
    peak = std::max(peak, v);
  }
  ScalarGrid out{raw.spec, std::vector<double>(raw.values.size())};
  double total = 0.0;
  for (std::size_t j = 0; j < raw.values.size(); ++j) {
    out.values[j] = std::exp(raw.values[j] - peak);
    total += out.values[j];
  }
  for (double& v : out.values) v /= total;
  return out;
}

double kl_divergence(const ScalarGrid& field, const ScalarGrid& target) {
  if (!(field.spec == target.spec) || field.values.size() != target.values.size()) {
    throw Error(ErrorCode::SpecMismatch, "distributions live on different grids");
  }
  double kl = 0.0;
  for (std::size_t j = 0; j < field.values.size(); ++j) {
    const double p = field.values[j];
    // Never floor above p itself, so identical inputs give exactly zero.
    if (p > 0.0) kl += p * std::log(p / std::max(target.values[j], std::min(p, kKlTargetFloor)));
  }
  return kl;
}

double soft_argmax_1d(std::span<const double> marginal, int half_window) {
  const int n = static_cast<int>(marginal.size());
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty marginal");
  const double peak = *std::max_element(marginal.begin(), marginal.end());
  const double tie = peak - 1e-12 * std::abs(peak);
  int first = 0;
  while (marginal[first] < tie) ++first;
  int last = n - 1;
  while (marginal[last] < tie) --last;

  double x = 0.5 * (first + last);
  const double reach = half_window + 0.5;
  for (int iter = 0; iter < 500; ++iter) {
    const int lo = std::max(0, static_cast<int>(std::floor(x - reach)));
    const int hi = std::min(n - 1, static_cast<int>(std::ceil(x + reach)));
    double mass = 0.0;
    double moment = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double overlap =
          std::clamp(std::min(j + 0.5, x + reach) - std::max(j - 0.5, x - reach), 0.0, 1.0);
      mass += overlap * marginal[j];
      moment += overlap * marginal[j] * j;
    }
    if (!(mass > 0.0)) break;
    const double next = moment / mass;
    const bool done = std::abs(next - x) < 1e-13;
    x = next;
    if (done) break;
  }
  return x;
}

ExtractedKeypoint extract_keypoint(const ScalarGrid& prob) {
  const GridSpec& spec = prob.spec;
  if (prob.values.size() != spec.cell_count()) {
    throw Error(ErrorCode::SpecMismatch, "grid values do not match the grid shape");
  }
  std::array<std::vector<double>, 3> marginals{std::vector<double>(spec.dims[0], 0.0),
                                               std::vector<double>(spec.dims[1], 0.0),
                                               std::vector<double>(spec.dims[2], 0.0)};
  std::size_t j = 0;
  for (int iz = 0; iz < spec.dims[2]; ++iz) {
    for (int iy = 0; iy < spec.dims[1]; ++iy) {
      for (int ix = 0; ix < spec.dims[0]; ++ix, ++j) {
        const double v = prob.values[j];
        marginals[0][ix] += v;
        marginals[1][iy] += v;
        marginals[2][iz] += v;
      }
    }
  }
  ExtractedKeypoint out;
  out.confidence = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    out.position[axis] = spec.axis_coordinate(axis, soft_argmax_1d(marginals[axis]));
    out.confidence *= *std::max_element(marginals[axis].begin(), marginals[axis].end());
  }
  out.low_confidence = out.confidence < 2.0 / static_cast<double>(spec.cell_count());
  return out;
}

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

double keypoint_loss(std::span<const Vec3> predicted, std::span<const Vec3> target, double beta) {
  if (predicted.size() != target.size()) {
    throw Error(ErrorCode::CountMismatch, "predicted and target keypoint counts differ");
  }
  if (predicted.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (int axis = 0; axis < 3; ++axis) total += smooth_l1(predicted[i][axis] - target[i][axis], beta);
  }
  return total / static_cast<double>(predicted.size());
}

}  // namespace posevolume
