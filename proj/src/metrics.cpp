#include "posevolume/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "posevolume/error.hpp"

namespace posevolume {

double model_diameter(std::span<const Vec3> points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

ModelPoints ModelPoints::from_points(std::vector<Vec3> points, bool symmetric) {
  if (points.size() < 2) throw Error(ErrorCode::TooFewModelPoints, "a model needs at least 2 points");
  ModelPoints m;
  m.diameter = model_diameter(points);
  if (!(m.diameter > 0.0)) throw Error(ErrorCode::InvalidArgument, "model points are all coincident");
  m.points = std::move(points);
  m.symmetric = symmetric;
  return m;
}

Vec3 ModelPoints::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

double add_metric(const RigidTransform& est, const RigidTransform& gt, const ModelPoints& model) {
  if (model.points.empty()) throw Error(ErrorCode::TooFewModelPoints, "empty model");
  double total = 0.0;
  for (const Vec3& p : model.points) total += (gt.apply(p) - est.apply(p)).norm();
  return total / static_cast<double>(model.points.size());
}

NearestNeighbors::NearestNeighbors(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error(ErrorCode::InvalidArgument, "no points to search");
  use_grid_ = points_.size() > kBruteForceNearestLimit;
  if (!use_grid_) return;

  Vec3 lo = points_.front();
  Vec3 hi = points_.front();
  for (const Vec3& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = (hi - lo).cwiseMax(Vec3::Constant(1e-9));
  // Roughly four points per occupied cell.
  cell_ = std::cbrt(extent.prod() * 4.0 / static_cast<double>(points_.size()));
  cell_ = std::max(cell_, extent.maxCoeff() / 256.0);
  origin_ = lo;
  for (int a = 0; a < 3; ++a) dims_[a] = std::max(1, static_cast<int>(std::ceil(extent[a] / cell_)) + 1);

  const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  std::vector<std::size_t> cell_of(points_.size());
  std::vector<std::size_t> counts(cells + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>((points_[i][a] - origin_[a]) / cell_), 0, dims_[a] - 1);
    }
    cell_of[i] = c[0] + static_cast<std::size_t>(dims_[0]) * (c[1] + static_cast<std::size_t>(dims_[1]) * c[2]);
    ++counts[cell_of[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) counts[c + 1] += counts[c];
  cell_start_ = counts;
  order_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) order_[counts[cell_of[i]]++] = i;
}

double NearestNeighbors::distance(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  if (!use_grid_) {
    for (const Vec3& p : points_) best = std::min(best, (p - q).squaredNorm());
    return std::sqrt(best);
  }
  std::array<int, 3> home{};
  for (int a = 0; a < 3; ++a) {
    home[a] = std::clamp(static_cast<int>(std::floor((q[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
  }
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  for (int ring = 0; ring <= max_ring; ++ring) {
    for (int z = home[2] - ring; z <= home[2] + ring; ++z) {
      if (z < 0 || z >= dims_[2]) continue;
      for (int y = home[1] - ring; y <= home[1] + ring; ++y) {
        if (y < 0 || y >= dims_[1]) continue;
        for (int x = home[0] - ring; x <= home[0] + ring; ++x) {
          if (x < 0 || x >= dims_[0]) continue;
          const int cheb = std::max({std::abs(x - home[0]), std::abs(y - home[1]), std::abs(z - home[2])});
          if (cheb != ring) continue;
          const std::size_t c = x + static_cast<std::size_t>(dims_[0]) * (y + static_cast<std::size_t>(dims_[1]) * z);
          for (std::size_t k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            best = std::min(best, (points_[order_[k]] - q).squaredNorm());
          }
        }
      }
    }
    // Every cell in ring r + 1 is at least r cells away from q.
    const double bound = ring * cell_;
    if (best <= bound * bound) break;
  }
  return std::sqrt(best);
}

double adds_metric(const RigidTransform& est, const RigidTransform& gt, const ModelPoints& model) {
  if (model.points.empty()) throw Error(ErrorCode::TooFewModelPoints, "empty model");
  std::vector<Vec3> target;
  target.reserve(model.points.size());
  for (const Vec3& p : model.points) target.push_back(gt.apply(p));
  const NearestNeighbors nn(std::move(target));
  double total = 0.0;
  for (const Vec3& p : model.points) total += nn.distance(est.apply(p));
  return total / static_cast<double>(model.points.size());
}

bool success(const RigidTransform& est, const RigidTransform& gt, const ModelPoints& model) {
  const double metric = model.symmetric ? adds_metric(est, gt, model) : add_metric(est, gt, model);
  return metric < 0.1 * model.diameter;
}

std::vector<OcclusionBin> occlusion_curve(std::span<const OcclusionSample> samples,
                                          std::span<const double> edges) {
  if (edges.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two bin edges");
  std::vector<OcclusionBin> bins(edges.size() - 1);
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    if (!(edges[b + 1] > edges[b])) throw Error(ErrorCode::InvalidArgument, "bin edges must increase");
    bins[b].lo = edges[b];
    bins[b].hi = edges[b + 1];
  }
  for (const OcclusionSample& s : samples) {
    if (!(s.invisible_fraction >= 0.0 && s.invisible_fraction <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "invisible fraction must lie in [0, 1]");
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const bool last = b + 1 == bins.size();
      if (s.invisible_fraction >= bins[b].lo &&
          (s.invisible_fraction < bins[b].hi || (last && s.invisible_fraction == bins[b].hi))) {
        ++bins[b].total;
        bins[b].successes += s.success ? 1 : 0;
        break;
      }
    }
  }
  for (OcclusionBin& bin : bins) {
    if (bin.total > 0) bin.accuracy = static_cast<double>(bin.successes) / static_cast<double>(bin.total);
  }
  return bins;
}

double accuracy_slope(std::span<const OcclusionBin> bins) {
  double n = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const OcclusionBin& b : bins) {
    if (!b.accuracy) continue;
    const double x = 0.5 * (b.lo + b.hi);
    n += 1.0;
    sx += x;
    sy += *b.accuracy;
    sxx += x * x;
    sxy += x * *b.accuracy;
  }
  const double denom = n * sxx - sx * sx;
  if (n < 2.0 || !(std::abs(denom) > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "slope needs at least two non-empty bins");
  }
  return (n * sxy - sx * sy) / denom;
}

std::string format_results_csv(std::span<const ResultRow> rows) {
  std::string out;
  out += kResultsCsvVersion;
  out += '\n';
  out += kResultsCsvHeader;
  out += '\n';
  char buf[256];
  for (const ResultRow& r : rows) {
    std::snprintf(buf, sizeof buf, ",%s,%.9g,%.9g,%d,%.6f\n", r.method.c_str(), r.add, r.adds,
                  r.success ? 1 : 0, r.invisible_fraction);
    out += r.scene_id;
    out += buf;
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kResultsCsvHeader) {
        throw Error(ErrorCode::SchemaMismatch, "unexpected results header: " + line);
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> cols;
    std::string col;
    std::istringstream ls(line);
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (cols.size() != 6) {
      throw Error(ErrorCode::SchemaMismatch, "results line " + std::to_string(line_no) + " has " +
                                                 std::to_string(cols.size()) + " columns");
    }
    try {
      rows.push_back({cols[0], cols[1], std::stod(cols[2]), std::stod(cols[3]), cols[4] == "1",
                      std::stod(cols[5])});
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaMismatch, "results line " + std::to_string(line_no) + " is not numeric");
    }
  }
  if (!header_seen) throw Error(ErrorCode::SchemaMismatch, "results file has no header");
  return rows;
}

}  // namespace posevolume
