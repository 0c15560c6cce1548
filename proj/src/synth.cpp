#include "posevolume/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "posevolume/error.hpp"

namespace posevolume {

void SynthConfig::validate() const {
  if (n_keypoints < 4) throw Error(ErrorCode::InvalidArgument, "n_keypoints must be at least 4");
  if (!(baseline_m >= 0.0)) throw Error(ErrorCode::InvalidArgument, "baseline_m must be >= 0");
  if (!(noise_px >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_px must be >= 0");
  if (!(outlier_rate >= 0.0 && outlier_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "outlier_rate must lie in [0, 1]");
  }
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "occlusion_fraction must lie in [0, 1]");
  }
  if (!(prior_depth_m > 0.0) || !(depth_jitter_m >= 0.0) || depth_jitter_m >= prior_depth_m) {
    throw Error(ErrorCode::InvalidArgument, "prior depth must exceed its jitter");
  }
}

CameraIntrinsics default_intrinsics() { return {572.4114, 573.57043, 325.2611, 242.04899, 640, 480}; }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

struct Box {
  Vec3 lo;
  Vec3 hi;
  double area() const {
    const Vec3 e = hi - lo;
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
  }
  bool strictly_inside(const Vec3& p) const {
    return (p.array() > lo.array() + 1e-9).all() && (p.array() < hi.array() - 1e-9).all();
  }
  Vec3 sample_surface(Rng& rng) const {
    const Vec3 e = hi - lo;
    const std::array<double, 3> face{e.y() * e.z(), e.x() * e.z(), e.x() * e.y()};
    double pick = uniform(rng, 0.0, face[0] + face[1] + face[2]);
    int axis = 0;
    while (axis < 2 && pick > face[axis]) pick -= face[axis++];
    Vec3 p(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()), uniform(rng, lo.z(), hi.z()));
    p[axis] = uniform(rng, 0.0, 1.0) < 0.5 ? lo[axis] : hi[axis];
    return p;
  }
};

std::vector<Vec3> recenter(std::vector<Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  for (Vec3& p : pts) p -= c;
  return pts;
}

std::vector<Vec3> sample_box_union(const std::vector<Box>& boxes, int n, Rng& rng) {
  double total = 0.0;
  for (const Box& b : boxes) total += b.area();
  std::vector<Vec3> pts;
  pts.reserve(n);
  while (static_cast<int>(pts.size()) < n) {
    double pick = uniform(rng, 0.0, total);
    std::size_t k = 0;
    while (k + 1 < boxes.size() && pick > boxes[k].area()) pick -= boxes[k++].area();
    const Vec3 p = boxes[k].sample_surface(rng);
    bool buried = false;
    for (std::size_t j = 0; j < boxes.size() && !buried; ++j) buried = j != k && boxes[j].strictly_inside(p);
    if (!buried) pts.push_back(p);
  }
  return pts;
}

Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Mat3 look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = Vec3::UnitX() - z * z.x();
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 world_from_camera;
  world_from_camera << x, y, z;
  return world_from_camera;
}

void splat_gaussian(FeatureMap& map, int channel, double cu, double cv, double sigma) {
  const double reach = 6.0 * sigma;
  const int u_lo = std::max(0, static_cast<int>(std::ceil(cu - reach)));
  const int u_hi = std::min(map.width - 1, static_cast<int>(std::floor(cu + reach)));
  const int v_lo = std::max(0, static_cast<int>(std::ceil(cv - reach)));
  const int v_hi = std::min(map.height - 1, static_cast<int>(std::floor(cv + reach)));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int v = v_lo; v <= v_hi; ++v) {
    for (int u = u_lo; u <= u_hi; ++u) {
      const double d2 = (u - cu) * (u - cu) + (v - cv) * (v - cv);
      float& cell = map.pixel(u, v)[channel];
      cell = std::max(cell, static_cast<float>(std::exp(-d2 * inv)));
    }
  }
}

void splat_disc(FeatureMap& map, double cu, double cv, double radius) {
  const int u_lo = std::max(0, static_cast<int>(std::ceil(cu - radius)));
  const int u_hi = std::min(map.width - 1, static_cast<int>(std::floor(cu + radius)));
  const int v_lo = std::max(0, static_cast<int>(std::ceil(cv - radius)));
  const int v_hi = std::min(map.height - 1, static_cast<int>(std::floor(cv + radius)));
  for (int v = v_lo; v <= v_hi; ++v) {
    for (int u = u_lo; u <= u_hi; ++u) {
      if ((u - cu) * (u - cu) + (v - cv) * (v - cv) <= radius * radius) map.mask_at(u, v) = 1.0f;
    }
  }
}

/// Full-resolution pixel center of map pixel (u, v).
Vec2 full_res_pixel(const FeatureMap& map, const CameraIntrinsics& k, int u, int v) {
  const double sx = static_cast<double>(k.width) / map.width;
  const double sy = static_cast<double>(k.height) / map.height;
  return {(u + 0.5) * sx - 0.5, (v + 0.5) * sy - 0.5};
}

Vec2 to_map_pixel(const FeatureMap& map, const CameraIntrinsics& k, const Vec2& full) {
  const double sx = static_cast<double>(map.width) / k.width;
  const double sy = static_cast<double>(map.height) / k.height;
  return {(full.x() + 0.5) * sx - 0.5, (full.y() + 0.5) * sy - 0.5};
}

}  // namespace

std::vector<std::string> builtin_model_names() { return {"cube", "cylinder", "ape"}; }

ModelPoints make_builtin_model(const std::string& name, int n_points) {
  if (n_points < 16) throw Error(ErrorCode::TooFewModelPoints, "built-in models need at least 16 points");
  std::uint64_t name_hash = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char ch : name) name_hash = (name_hash ^ ch) * 0x100000001B3ULL;
  Rng rng(name_hash);
  std::vector<Vec3> pts;
  bool symmetric = false;
  if (name == "cube") {
    const double h = 0.05;
    for (int c = 0; c < 8; ++c) pts.emplace_back(c & 1 ? h : -h, c & 2 ? h : -h, c & 4 ? h : -h);
    const auto rest = sample_box_union({Box{Vec3::Constant(-h), Vec3::Constant(h)}}, n_points - 8, rng);
    pts.insert(pts.end(), rest.begin(), rest.end());
    symmetric = true;
  } else if (name == "cylinder") {
    const double r = 0.04;
    const double h = 0.06;
    const double side = 2.0 * M_PI * r * 2.0 * h;
    const double cap = M_PI * r * r;
    while (static_cast<int>(pts.size()) < n_points) {
      const double pick = uniform(rng, 0.0, side + 2.0 * cap);
      const double phi = uniform(rng, 0.0, 2.0 * M_PI);
      if (pick < side) {
        pts.emplace_back(r * std::cos(phi), r * std::sin(phi), uniform(rng, -h, h));
      } else {
        const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
        pts.emplace_back(rho * std::cos(phi), rho * std::sin(phi), pick < side + cap ? -h : h);
      }
    }
    symmetric = true;
  } else if (name == "ape") {
    const std::vector<Box> boxes{
        {{-0.030, -0.040, -0.025}, {0.030, 0.030, 0.025}},   // torso
        {{-0.020, 0.030, -0.015}, {0.022, 0.068, 0.028}},    // head, pushed forward
        {{0.030, -0.010, -0.010}, {0.058, 0.012, 0.012}},    // one raised arm
        {{-0.045, -0.036, -0.008}, {-0.030, -0.006, 0.008}}, // short arm
        {{-0.026, -0.062, -0.012}, {-0.004, -0.040, 0.014}}, // left foot
        {{0.006, -0.058, -0.020}, {0.028, -0.040, 0.006}},   // right foot, offset
        {{-0.006, 0.050, 0.028}, {0.008, 0.058, 0.040}},     // snout
    };
    pts = sample_box_union(boxes, n_points, rng);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown built-in model '" + name + "'");
  }
  return ModelPoints::from_points(recenter(std::move(pts)), symmetric);
}

std::vector<Vec3> load_ply_points(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open PLY file " + path);

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::SchemaMismatch, path + " is not a PLY file");

  struct Property {
    std::string name;
    std::string type;
  };
  bool ascii = false;
  bool in_vertex = false;
  bool vertex_first = false;
  bool seen_element = false;
  std::size_t vertex_count = 0;
  std::vector<Property> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt != "binary_little_endian") {
        throw Error(ErrorCode::SchemaMismatch, "unsupported PLY format " + fmt);
      }
    } else if (word == "element") {
      std::string kind;
      std::size_t count = 0;
      ls >> kind >> count;
      in_vertex = kind == "vertex";
      if (in_vertex) {
        vertex_count = count;
        vertex_first = !seen_element;
      }
      seen_element = true;
    } else if (word == "property" && in_vertex) {
      Property p;
      ls >> p.type;
      if (p.type == "list") throw Error(ErrorCode::SchemaMismatch, "list properties on vertices are unsupported");
      ls >> p.name;
      props.push_back(p);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!vertex_first) throw Error(ErrorCode::SchemaMismatch, "PLY vertex element must come first");

  std::array<int, 3> slot{-1, -1, -1};
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") slot[0] = static_cast<int>(i);
    if (props[i].name == "y") slot[1] = static_cast<int>(i);
    if (props[i].name == "z") slot[2] = static_cast<int>(i);
  }
  if (slot[0] < 0 || slot[1] < 0 || slot[2] < 0) {
    throw Error(ErrorCode::SchemaMismatch, "PLY vertices need x, y and z properties");
  }

  auto type_size = [](const std::string& t) -> std::size_t {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw Error(ErrorCode::SchemaMismatch, "unknown PLY property type " + t);
  };
  auto decode = [](const std::string& t, const char* bytes) -> double {
    auto get = [bytes](auto v) {
      std::memcpy(&v, bytes, sizeof v);
      return static_cast<double>(v);
    };
    if (t == "char" || t == "int8") return get(std::int8_t{});
    if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
    if (t == "short" || t == "int16") return get(std::int16_t{});
    if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
    if (t == "int" || t == "int32") return get(std::int32_t{});
    if (t == "uint" || t == "uint32") return get(std::uint32_t{});
    if (t == "float" || t == "float32") return get(float{});
    return get(double{});
  };

  std::vector<Vec3> pts;
  pts.reserve(vertex_count);
  if (ascii) {
    for (std::size_t i = 0; i < vertex_count; ++i) {
      if (!std::getline(in, line)) throw Error(ErrorCode::SchemaMismatch, "PLY file truncated");
      std::istringstream ls(line);
      std::vector<double> vals(props.size());
      for (double& v : vals) {
        if (!(ls >> v)) throw Error(ErrorCode::SchemaMismatch, "malformed PLY vertex line");
      }
      pts.emplace_back(vals[slot[0]], vals[slot[1]], vals[slot[2]]);
    }
  } else {
    std::vector<std::size_t> offset(props.size());
    std::size_t stride = 0;
    for (std::size_t i = 0; i < props.size(); ++i) {
      offset[i] = stride;
      stride += type_size(props[i].type);
    }
    std::vector<char> buf(stride);
    for (std::size_t i = 0; i < vertex_count; ++i) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride))) {
        throw Error(ErrorCode::SchemaMismatch, "PLY file truncated");
      }
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = decode(props[slot[a]].type, buf.data() + offset[slot[a]]);
      pts.push_back(p);
    }
  }
  return pts;
}

std::vector<Vec3> select_keypoints(const ModelPoints& model, int n) {
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "at least 4 keypoints are required");
  if (static_cast<int>(model.points.size()) < n) {
    throw Error(ErrorCode::TooFewModelPoints, "model has fewer points than requested keypoints");
  }
  const Vec3 centroid = model.centroid();
  std::vector<Vec3> keypoints{centroid};
  std::vector<double> nearest(model.points.size());
  for (std::size_t j = 0; j < model.points.size(); ++j) nearest[j] = (model.points[j] - centroid).squaredNorm();
  while (static_cast<int>(keypoints.size()) < n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < nearest.size(); ++j) {
      if (nearest[j] > nearest[best]) best = j;
    }
    const Vec3 chosen = model.points[best];
    keypoints.push_back(chosen);
    for (std::size_t j = 0; j < nearest.size(); ++j) {
      nearest[j] = std::min(nearest[j], (model.points[j] - chosen).squaredNorm());
    }
  }
  return keypoints;
}

Scene generate_scene(const SynthConfig& cfg, const ModelPoints& model) {
  cfg.validate();
  const CameraIntrinsics k = default_intrinsics();
  Rng rng(cfg.seed);
  const double margin = 8.0;

  auto in_view = [&](const RigidTransform& cam_from_world, const RigidTransform& pose) {
    for (const Vec3& p : model.points) {
      const Vec3 c = cam_from_world.apply(pose.apply(p));
      if (c.z() < 0.05) return false;
      const PixelDepth px = project_point(c, k);
      if (px.u < margin || px.v < margin || px.u > k.width - 1 - margin || px.v > k.height - 1 - margin) {
        return false;
      }
    }
    return true;
  };

  for (int attempt = 0; attempt < 100; ++attempt) {
    const Mat3 rotation = random_rotation(rng);
    const double depth = cfg.prior_depth_m + uniform(rng, -cfg.depth_jitter_m, cfg.depth_jitter_m);
    const double u = uniform(rng, 0.3 * k.width, 0.7 * k.width);
    const double v = uniform(rng, 0.3 * k.height, 0.7 * k.height);
    const RigidTransform pose(rotation, unproject_pixel(u, v, depth, k));

    RigidTransform query_from_world;
    if (cfg.baseline_m > 0.0) {
      const double phi = uniform(rng, 0.0, 2.0 * M_PI);
      const Vec3 dir = Vec3(std::cos(phi), std::sin(phi), uniform(rng, -0.3, 0.3)).normalized();
      const Vec3 eye = cfg.baseline_m * dir;
      const Vec3 wobble_axis = random_rotation(rng).col(0);
      const double wobble = uniform(rng, 0.0, M_PI / 180.0);
      const Mat3 world_from_camera = axis_angle(wobble_axis, wobble) * look_at(eye, pose.translation());
      query_from_world = RigidTransform(world_from_camera, eye).inverse();
    }

    if (!in_view(RigidTransform::identity(), pose) || !in_view(query_from_world, pose)) continue;

    Scene scene{cfg.seed, pose, ViewPair(k, RigidTransform::identity(), query_from_world), {}, 0.0};
    if (cfg.occlusion_fraction > 0.0) {
      // Sweep a full-span band in from a random image side until it covers
      // the requested share of projected model points.
      const int side = std::uniform_int_distribution<int>(0, 3)(rng);
      std::vector<double> coord;
      coord.reserve(model.points.size());
      for (const Vec3& p : model.points) {
        const PixelDepth px = project_point(pose.apply(p), k);
        const double c = (side < 2) ? px.u : px.v;
        coord.push_back(side % 2 == 0 ? c : -c);
      }
      std::sort(coord.begin(), coord.end());
      const auto covered = static_cast<std::size_t>(std::lround(cfg.occlusion_fraction * coord.size()));
      if (covered > 0) {
        const double cut = covered >= coord.size() ? coord.back() + 1.0 : 0.5 * (coord[covered - 1] + coord[covered]);
        const double big = 1e6;
        OccluderRect r{-big, -big, big, big};
        if (side == 0) r.u1 = cut;
        if (side == 1) r.u0 = -cut;
        if (side == 2) r.v1 = cut;
        if (side == 3) r.v0 = -cut;
        scene.occluder = r;
      }
    }
    scene.invisible_fraction = invisible_fraction(scene, model);
    return scene;
  }
  throw Error(ErrorCode::Unplaceable, "no in-frustum placement found in 100 attempts");
}

double invisible_fraction(const Scene& scene, const ModelPoints& model) {
  const CameraIntrinsics& k = scene.pair.intrinsics();
  std::size_t hidden = 0;
  for (const Vec3& p : model.points) {
    const Vec3 c = scene.pair.ref_from_world().apply(scene.object_pose.apply(p));
    if (c.z() <= 0.0) {
      ++hidden;
      continue;
    }
    const PixelDepth px = project_point(c, k);
    const bool outside = px.u < 0.0 || px.v < 0.0 || px.u > k.width - 1 || px.v > k.height - 1;
    if (outside || scene.occluder.covers(px.u, px.v)) ++hidden;
  }
  return static_cast<double>(hidden) / static_cast<double>(model.points.size());
}

std::vector<std::uint8_t> occluder_mask(const Scene& scene) {
  const CameraIntrinsics& k = scene.pair.intrinsics();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(k.width) * k.height, 0);
  if (scene.occluder.empty()) return mask;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      if (scene.occluder.covers(u, v)) mask[static_cast<std::size_t>(v) * k.width + u] = 1;
    }
  }
  return mask;
}

OracleFeatures oracle_features(const Scene& scene, const ModelPoints& model,
                               const std::vector<Vec3>& keypoints, const SynthConfig& cfg) {
  cfg.validate();
  const CameraIntrinsics& k = scene.pair.intrinsics();
  const int n = static_cast<int>(keypoints.size());
  Rng rng(derive_seed(scene.seed, 0xFEA7));
  std::normal_distribution<double> jitter(0.0, 1.0);

  OracleFeatures out;
  const int qw = k.width / kCoarseTapFactor;
  const int qh = k.height / kCoarseTapFactor;
  out.ref = {FeatureMap(k.width, k.height, n), FeatureMap(qw, qh, n)};
  out.query = {FeatureMap(k.width, k.height, n), FeatureMap(qw, qh, n)};

  const std::array<const RigidTransform*, 2> cams{&scene.pair.ref_from_world(), &scene.pair.query_from_world()};
  std::array<ViewFeatures*, 2> views{&out.ref, &out.query};
  std::array<std::vector<Vec2>*, 2> centers{&out.ref_centers, &out.query_centers};

  for (int view = 0; view < 2; ++view) {
    for (int i = 0; i < n; ++i) {
      const PixelDepth px = project_point(cams[view]->apply(scene.object_pose.apply(keypoints[i])), k);
      Vec2 c(px.u + cfg.noise_px * jitter(rng), px.v + cfg.noise_px * jitter(rng));
      // Always draw the relocation so the stream does not depend on the outcome.
      const double roll = uniform(rng, 0.0, 1.0);
      const Vec2 relocated(uniform(rng, 0.0, k.width - 1.0), uniform(rng, 0.0, k.height - 1.0));
      if (roll < cfg.outlier_rate) c = relocated;
      centers[view]->push_back(c);
      for (FeatureMap& map : *views[view]) {
        const Vec2 m = to_map_pixel(map, k, c);
        splat_gaussian(map, i, m.x(), m.y(), kResponseSigmaPx);
      }
    }
    for (FeatureMap& map : *views[view]) {
      const CameraIntrinsics mk = k.scaled_to(map.width, map.height);
      const double radius = kSilhouetteRadiusPx * map.width / k.width;
      for (const Vec3& p : model.points) {
        const PixelDepth px = project_point(cams[view]->apply(scene.object_pose.apply(p)), mk);
        splat_disc(map, px.u, px.v, std::max(radius, 1.0));
      }
    }
  }

  if (!scene.occluder.empty()) {
    for (FeatureMap& map : out.ref) {
      for (int v = 0; v < map.height; ++v) {
        for (int u = 0; u < map.width; ++u) {
          const Vec2 full = full_res_pixel(map, k, u, v);
          if (!scene.occluder.covers(full.x(), full.y())) continue;
          auto px = map.pixel(u, v);
          std::fill(px.begin(), px.end(), 0.0f);
          map.mask_at(u, v) = 0.0f;
        }
      }
    }
  }
  return out;
}

}  // namespace posevolume
