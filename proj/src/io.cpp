#include "posevolume/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "posevolume/error.hpp"

namespace posevolume::io {

using json = nlohmann::json;

namespace {

json pose_json(const RigidTransform& pose) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(pose.rotation()(i, j));
  }
  const Vec3& t = pose.translation();
  return {{"R", r}, {"t", {t.x(), t.y(), t.z()}}};
}

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::SchemaMismatch, what); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) schema(std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) schema(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> numbers(const json& j, const char* key, std::size_t count) {
  const json& v = field(j, key);
  if (!v.is_array() || v.size() != count) {
    schema(std::string("field '") + key + "' must be an array of " + std::to_string(count) + " numbers");
  }
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) schema(std::string("field '") + key + "' must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

RigidTransform pose_from(const json& j) {
  const auto r = numbers(j, "R", 9);
  const auto t = numbers(j, "t", 3);
  Mat3 rotation;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) rotation(i, k) = r[3 * i + k];
  }
  try {
    return {rotation, Vec3(t[0], t[1], t[2])};
  } catch (const Error& e) {
    schema(std::string("invalid pose: ") + e.what());
  }
}

json intrinsics_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from(const json& j) {
  CameraIntrinsics k{number(j, "fx"), number(j, "fy"), number(j, "cx"), number(j, "cy"),
                     static_cast<int>(number(j, "width")), static_cast<int>(number(j, "height"))};
  try {
    k.validate();
  } catch (const Error& e) {
    schema(std::string("invalid intrinsics: ") + e.what());
  }
  return k;
}

json parse_json(const std::string& text, ErrorCode code) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << "syntax error at line " << line << ", column " << col;
    throw Error(code, os.str());
  }
}

/// Typed optional read of a config field; errors name the field.
class ConfigReader {
 public:
  explicit ConfigReader(const json& j) : j_(j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigParseError, "config must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer() || v.is_number_unsigned();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else {
      ok = v.is_array();
    }
    if (!ok) throw Error(ErrorCode::ConfigParseError, std::string("field '") + key + "' has the wrong type");
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::ConfigParseError, std::string("field '") + key + "' has the wrong type");
    }
  }

  void reject_unknown() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw Error(ErrorCode::ConfigParseError, "unknown field '" + item.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::set<std::string> seen_;
};

json synth_json(const SynthConfig& s) {
  return {{"seed", s.seed},
          {"n_keypoints", s.n_keypoints},
          {"baseline_m", s.baseline_m},
          {"noise_px", s.noise_px},
          {"outlier_rate", s.outlier_rate},
          {"occlusion_fraction", s.occlusion_fraction},
          {"prior_depth_m", s.prior_depth_m},
          {"depth_jitter_m", s.depth_jitter_m}};
}

void read_synth(ConfigReader& r, SynthConfig& s) {
  r.read("seed", s.seed);
  r.read("n_keypoints", s.n_keypoints);
  r.read("baseline_m", s.baseline_m);
  r.read("noise_px", s.noise_px);
  r.read("outlier_rate", s.outlier_rate);
  r.read("occlusion_fraction", s.occlusion_fraction);
  r.read("prior_depth_m", s.prior_depth_m);
  r.read("depth_jitter_m", s.depth_jitter_m);
}

template <typename Fn>
void as_config_error(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::ConfigParseError, e.what());
    throw;
  }
}

std::string read_header_line(std::ifstream& in, const std::filesystem::path& path) {
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::SchemaMismatch, path.string() + " has no header line");
  return header;
}

void write_floats(std::ofstream& out, const float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint32_t>(data[i]);
      bits = (bits >> 24) | ((bits >> 8) & 0xFF00u) | ((bits << 8) & 0xFF0000u) | (bits << 24);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
}

void read_floats(std::ifstream& in, float* data, std::size_t count, const std::filesystem::path& path) {
  if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(float)))) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + " payload is truncated");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint32_t>(data[i]);
      bits = (bits >> 24) | ((bits >> 8) & 0xFF00u) | ((bits << 8) & 0xFF0000u) | (bits << 24);
      data[i] = std::bit_cast<float>(bits);
    }
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return in;
}

json grid_header(const GridSpec& spec, int channels) {
  return {{"kind", "volume"},
          {"center", {spec.center.x(), spec.center.y(), spec.center.z()}},
          {"dims", {spec.dims[0], spec.dims[1], spec.dims[2]}},
          {"cell_size", {spec.cell_size.x(), spec.cell_size.y(), spec.cell_size.z()}},
          {"channels", channels},
          {"dtype", "float32-le"},
          {"layout", "x-fastest cells, channels interleaved"}};
}

}  // namespace

std::string pose_to_json(const RigidTransform& pose) { return pose_json(pose).dump(); }
RigidTransform pose_from_json(const std::string& text) {
  return pose_from(parse_json(text, ErrorCode::SchemaMismatch));
}
std::string intrinsics_to_json(const CameraIntrinsics& k) { return intrinsics_json(k).dump(); }
CameraIntrinsics intrinsics_from_json(const std::string& text) {
  return intrinsics_from(parse_json(text, ErrorCode::SchemaMismatch));
}

GenerateConfig parse_generate_config(const std::string& text) {
  const json j = parse_json(text, ErrorCode::ConfigParseError);
  GenerateConfig cfg;
  ConfigReader r(j);
  read_synth(r, cfg.synth);
  r.read("model", cfg.model);
  r.read("model_symmetric", cfg.model_symmetric);
  r.read("scenes", cfg.scenes);
  r.read("occlusion_sweep", cfg.occlusion_sweep);
  r.read("occlusion_levels", cfg.occlusion_levels);
  r.read("dump_features", cfg.dump_features);
  r.reject_unknown();
  if (cfg.scenes < 1) throw Error(ErrorCode::ConfigParseError, "field 'scenes' must be >= 1");
  if (cfg.occlusion_levels.empty()) {
    throw Error(ErrorCode::ConfigParseError, "field 'occlusion_levels' must not be empty");
  }
  as_config_error([&] { cfg.synth.validate(); });
  return cfg;
}

std::string generate_config_to_json(const GenerateConfig& cfg) {
  json j = synth_json(cfg.synth);
  j["model"] = cfg.model;
  j["model_symmetric"] = cfg.model_symmetric;
  j["scenes"] = cfg.scenes;
  j["occlusion_sweep"] = cfg.occlusion_sweep;
  j["occlusion_levels"] = cfg.occlusion_levels;
  j["dump_features"] = cfg.dump_features;
  return j.dump(2);
}

PipelineConfig parse_pipeline_config(const std::string& text) {
  const json j = parse_json(text, ErrorCode::ConfigParseError);
  PipelineConfig cfg;
  ConfigReader r(j);
  std::vector<double> half{cfg.coarse_half_range.x(), cfg.coarse_half_range.y(), cfg.coarse_half_range.z()};
  r.read("coarse_half_range_m", half);
  if (half.size() != 3) throw Error(ErrorCode::ConfigParseError, "field 'coarse_half_range_m' needs 3 values");
  cfg.coarse_half_range = Vec3(half[0], half[1], half[2]);
  r.read("coarse_cell_m", cfg.coarse_cell);
  r.read("fine_cell_m", cfg.fine_cell);
  r.read("fine_range_factor", cfg.fine_range_factor);
  r.read("sigma_factor", cfg.sigma_factor);
  r.read("coarse_tap_gains", cfg.coarse_tap_gains);
  r.read("fine_tap_gains", cfg.fine_tap_gains);
  r.read("gamma1_per_m", cfg.solver.gamma1);
  r.read("gamma2_m", cfg.solver.gamma2);
  r.read("temperature", cfg.solver.temperature);
  r.read("alpha", cfg.alpha);
  r.read("beta1", cfg.betas.beta1);
  r.read("beta2", cfg.betas.beta2);
  r.read("beta3", cfg.betas.beta3);
  r.reject_unknown();
  as_config_error([&] { cfg.validate(); });
  return cfg;
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  const Vec3& h = cfg.coarse_half_range;
  json j{{"coarse_half_range_m", {h.x(), h.y(), h.z()}},
         {"coarse_cell_m", cfg.coarse_cell},
         {"fine_cell_m", cfg.fine_cell},
         {"fine_range_factor", cfg.fine_range_factor},
         {"sigma_factor", cfg.sigma_factor},
         {"coarse_tap_gains", cfg.coarse_tap_gains},
         {"fine_tap_gains", cfg.fine_tap_gains},
         {"gamma1_per_m", cfg.solver.gamma1},
         {"gamma2_m", cfg.solver.gamma2},
         {"temperature", cfg.solver.temperature},
         {"alpha", cfg.alpha},
         {"beta1", cfg.betas.beta1},
         {"beta2", cfg.betas.beta2},
         {"beta3", cfg.betas.beta3}};
  return j.dump(2);
}

Scene SceneManifest::scene() const {
  return Scene{synth.seed, object_pose, ViewPair(intrinsics, ref_from_world, query_from_world), occluder,
               invisible_fraction};
}

SceneManifest make_manifest(const std::string& scene_id, const std::string& model, bool symmetric,
                            const SynthConfig& synth, const Scene& scene) {
  SceneManifest m;
  m.scene_id = scene_id;
  m.model = model;
  m.model_symmetric = symmetric;
  m.synth = synth;
  m.synth.seed = scene.seed;
  m.object_pose = scene.object_pose;
  m.intrinsics = scene.pair.intrinsics();
  m.ref_from_world = scene.pair.ref_from_world();
  m.query_from_world = scene.pair.query_from_world();
  m.occluder = scene.occluder;
  m.invisible_fraction = scene.invisible_fraction;
  return m;
}

std::string manifest_to_json(const SceneManifest& m) {
  json j{{"format", "posevolume-scene"},
         {"version", 1},
         {"scene_id", m.scene_id},
         {"model", m.model},
         {"model_symmetric", m.model_symmetric},
         {"config", synth_json(m.synth)},
         {"intrinsics", intrinsics_json(m.intrinsics)},
         {"object_pose", pose_json(m.object_pose)},
         {"ref_from_world", pose_json(m.ref_from_world)},
         {"query_from_world", pose_json(m.query_from_world)},
         {"invisible_fraction", m.invisible_fraction},
         {"feature_dumps", m.feature_dumps}};
  if (m.occluder.empty()) {
    j["occluder"] = nullptr;
  } else {
    j["occluder"] = {m.occluder.u0, m.occluder.v0, m.occluder.u1, m.occluder.v1};
  }
  return j.dump(2) + "\n";
}

SceneManifest manifest_from_json(const std::string& text) {
  const json j = parse_json(text, ErrorCode::SchemaMismatch);
  if (!j.is_object() || j.value("format", "") != "posevolume-scene") schema("not a posevolume scene manifest");
  if (!field(j, "version").is_number_integer() || j.at("version").get<int>() != 1) {
    schema("unsupported manifest version");
  }
  SceneManifest m;
  const json& id = field(j, "scene_id");
  const json& model = field(j, "model");
  if (!id.is_string() || !model.is_string()) schema("scene_id and model must be strings");
  m.scene_id = id.get<std::string>();
  m.model = model.get<std::string>();
  m.model_symmetric = j.value("model_symmetric", false);
  try {
    ConfigReader r(field(j, "config"));
    read_synth(r, m.synth);
    r.reject_unknown();
    m.synth.validate();
  } catch (const Error& e) {
    schema(std::string("bad config block: ") + e.what());
  }
  m.intrinsics = intrinsics_from(field(j, "intrinsics"));
  m.object_pose = pose_from(field(j, "object_pose"));
  m.ref_from_world = pose_from(field(j, "ref_from_world"));
  m.query_from_world = pose_from(field(j, "query_from_world"));
  m.invisible_fraction = number(j, "invisible_fraction");
  const json& occ = field(j, "occluder");
  if (!occ.is_null()) {
    const auto r = numbers(j, "occluder", 4);
    m.occluder = {r[0], r[1], r[2], r[3]};
  }
  if (j.contains("feature_dumps")) {
    const json& dumps = j.at("feature_dumps");
    if (!dumps.is_array()) schema("feature_dumps must be an array");
    for (const json& d : dumps) {
      if (!d.is_string()) schema("feature_dumps must contain file names");
      m.feature_dumps.push_back(d.get<std::string>());
    }
  }
  return m;
}

ModelPoints load_model(const std::string& name_or_path, bool symmetric) {
  for (const std::string& name : builtin_model_names()) {
    if (name == name_or_path) return make_builtin_model(name);
  }
  return ModelPoints::from_points(load_ply_points(name_or_path), symmetric);
}

void write_volume(const std::filesystem::path& path, const GeometricVolume& volume) {
  std::ofstream out = open_out(path);
  out << grid_header(volume.spec, volume.channels).dump() << '\n';
  write_floats(out, volume.values.data(), volume.values.size());
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

GeometricVolume read_volume(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const json h = parse_json(read_header_line(in, path), ErrorCode::SchemaMismatch);
  if (h.value("kind", "") != "volume" || h.value("dtype", "") != "float32-le") schema("not a volume dump");
  GeometricVolume v;
  const auto c = numbers(h, "center", 3);
  const auto d = numbers(h, "dims", 3);
  const auto s = numbers(h, "cell_size", 3);
  v.spec.center = Vec3(c[0], c[1], c[2]);
  v.spec.dims = {static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2])};
  v.spec.cell_size = Vec3(s[0], s[1], s[2]);
  v.channels = static_cast<int>(number(h, "channels"));
  v.values.resize(v.spec.cell_count() * v.channels);
  read_floats(in, v.values.data(), v.values.size(), path);
  return v;
}

void write_scalar_grid(const std::filesystem::path& path, const ScalarGrid& grid) {
  GeometricVolume v{grid.spec, 1, std::vector<float>(grid.values.begin(), grid.values.end())};
  write_volume(path, v);
}

void write_feature_map(const std::filesystem::path& path, const FeatureMap& map) {
  map.validate();
  std::ofstream out = open_out(path);
  const json h{{"kind", "feature_map"},
               {"width", map.width},
               {"height", map.height},
               {"channels", map.channels},
               {"dtype", "float32-le"},
               {"layout", "row-major pixels, channels interleaved, then the mask plane"}};
  out << h.dump() << '\n';
  write_floats(out, map.data.data(), map.data.size());
  write_floats(out, map.mask.data(), map.mask.size());
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

FeatureMap read_feature_map(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const json h = parse_json(read_header_line(in, path), ErrorCode::SchemaMismatch);
  if (h.value("kind", "") != "feature_map" || h.value("dtype", "") != "float32-le") {
    schema("not a feature map dump");
  }
  FeatureMap map(static_cast<int>(number(h, "width")), static_cast<int>(number(h, "height")),
                 static_cast<int>(number(h, "channels")));
  read_floats(in, map.data.data(), map.data.size(), path);
  read_floats(in, map.mask.data(), map.mask.size(), path);
  return map;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace posevolume::io
