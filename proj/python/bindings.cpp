#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "posevolume/benchmark.hpp"
#include "posevolume/error.hpp"
#include "posevolume/io.hpp"
#include "posevolume/runner.hpp"

namespace py = pybind11;
using namespace posevolume;

namespace {

using PointArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const PointArray& a) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out.emplace_back(a.row(i).transpose());
  return out;
}

PointArray from_points(const std::vector<Vec3>& pts) {
  PointArray a(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return a;
}

py::dict outcome_dict(const PoseOutcome& o) {
  py::dict d;
  d["failed"] = o.failed;
  d["add"] = o.add;
  d["adds"] = o.adds;
  d["success"] = o.success;
  d["keypoint_error"] = o.keypoint_error;
  return d;
}

PipelineConfig pipeline_config(const std::string& json_text) {
  return json_text.empty() ? PipelineConfig{} : io::parse_pipeline_config(json_text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-view volumetric 6D object pose toolkit";

  // Carries the library error code as `.code`.
  static PyObject* error_type =
      PyErr_NewException("posevolume._core.PoseVolumeError", PyExc_RuntimeError, nullptr);
  m.attr("PoseVolumeError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance =
          py::reinterpret_steal<py::object>(PyObject_CallFunction(error_type, "s", e.what()));
      instance.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, instance.ptr());
    }
  });

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init([](double fx, double fy, double cx, double cy, int width, int height) {
             CameraIntrinsics k{fx, fy, cx, cy, width, height};
             k.validate();
             return k;
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
      .def_readonly("fx", &CameraIntrinsics::fx)
      .def_readonly("fy", &CameraIntrinsics::fy)
      .def_readonly("cx", &CameraIntrinsics::cx)
      .def_readonly("cy", &CameraIntrinsics::cy)
      .def_readonly("width", &CameraIntrinsics::width)
      .def_readonly("height", &CameraIntrinsics::height);
  m.def("default_intrinsics", &default_intrinsics);

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init<>())
      .def(py::init<const Mat3&, const Vec3&>(), py::arg("rotation"), py::arg("translation"))
      .def_property_readonly("rotation", [](const RigidTransform& t) { return Mat3(t.rotation()); })
      .def_property_readonly("translation", [](const RigidTransform& t) { return Vec3(t.translation()); })
      .def("apply", &RigidTransform::apply)
      .def("inverse", &RigidTransform::inverse)
      .def("__mul__", &RigidTransform::operator*);

  m.def(
      "project_point",
      [](const Vec3& p, const CameraIntrinsics& k) {
        const PixelDepth q = project_point(p, k);
        return py::make_tuple(q.u, q.v, q.z);
      },
      py::arg("p_camera"), py::arg("intrinsics"), "Pixel (u, v) and depth of a camera-frame point.");
  m.def("unproject_pixel", &unproject_pixel, py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("intrinsics"));
  m.def(
      "triangulate",
      [](const Vec2& uv_ref, const Vec2& uv_query, const CameraIntrinsics& k, const RigidTransform& ref_from_world,
         const RigidTransform& query_from_world) {
        return triangulate(uv_ref, uv_query, ViewPair(k, ref_from_world, query_from_world));
      },
      py::arg("uv_ref"), py::arg("uv_query"), py::arg("intrinsics"), py::arg("ref_from_world"),
      py::arg("query_from_world"));

  m.def(
      "build_grid",
      [](const Vec3& center, const Vec3& half_range, double cell) {
        const GridSpec g = build_grid(center, half_range, cell);
        py::dict d;
        d["center"] = g.center;
        d["dims"] = g.dims;
        d["cell_size"] = g.cell_size;
        d["cell_count"] = g.cell_count();
        return d;
      },
      py::arg("center"), py::arg("half_range"), py::arg("cell_size"));

  m.def(
      "kabsch_align", [](const PointArray& model, const PointArray& scene) {
        const auto a = to_points(model), b = to_points(scene);
        return kabsch_align(a, b);
      },
      py::arg("model"), py::arg("scene"));
  m.def(
      "solve",
      [](const PointArray& model, const PointArray& scene, double gamma1, double gamma2, double temperature) {
        Correspondences c{to_points(model), to_points(scene)};
        return solve(c, SolverParams{gamma1, gamma2, temperature}).pose;
      },
      py::arg("model"), py::arg("scene"), py::arg("gamma1") = 100.0, py::arg("gamma2") = 0.02,
      py::arg("temperature") = 1.0, "Soft RANSAC over every 3-subset of the correspondences.");

  m.def(
      "model_points", [](const std::string& name) { return from_points(make_builtin_model(name).points); },
      py::arg("name"), "Points of a built-in model: cube, cylinder or ape.");
  m.def(
      "select_keypoints",
      [](const PointArray& points, int n) {
        return from_points(select_keypoints(ModelPoints::from_points(to_points(points), false), n));
      },
      py::arg("points"), py::arg("n") = 9);
  m.def(
      "add_metric",
      [](const RigidTransform& est, const RigidTransform& gt, const PointArray& points) {
        return add_metric(est, gt, ModelPoints::from_points(to_points(points), false));
      },
      py::arg("est"), py::arg("gt"), py::arg("points"));
  m.def(
      "adds_metric",
      [](const RigidTransform& est, const RigidTransform& gt, const PointArray& points) {
        return adds_metric(est, gt, ModelPoints::from_points(to_points(points), true));
      },
      py::arg("est"), py::arg("gt"), py::arg("points"));
  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("index"));

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("n_keypoints", &SynthConfig::n_keypoints)
      .def_readwrite("baseline_m", &SynthConfig::baseline_m)
      .def_readwrite("noise_px", &SynthConfig::noise_px)
      .def_readwrite("outlier_rate", &SynthConfig::outlier_rate)
      .def_readwrite("occlusion_fraction", &SynthConfig::occlusion_fraction)
      .def_readwrite("prior_depth_m", &SynthConfig::prior_depth_m)
      .def_readwrite("depth_jitter_m", &SynthConfig::depth_jitter_m);

  m.def(
      "evaluate_scene",
      [](const SynthConfig& cfg, const std::string& model, const std::string& method,
         const std::string& pipeline_json) {
        const SyntheticCase c = make_case(cfg, make_builtin_model(model));
        const CaseEvaluation e = evaluate_case(c, parse_method(method), pipeline_config(pipeline_json));
        py::dict d = outcome_dict(e.final);
        d["coarse"] = e.coarse ? py::object(outcome_dict(*e.coarse)) : py::none();
        d["invisible_fraction"] = c.scene.invisible_fraction;
        d["object_pose"] = c.scene.object_pose;
        return d;
      },
      py::arg("config"), py::arg("model") = "ape", py::arg("method") = "volume", py::arg("pipeline_json") = "",
      "Generates one synthetic scene and scores an estimator on it.");

  m.def(
      "generate_scenes",
      [](const std::string& config_json, const std::filesystem::path& out_dir) {
        return generate_scenes(io::parse_generate_config(config_json), out_dir).manifests;
      },
      py::arg("config_json"), py::arg("out_dir"), "Writes scene manifests; returns their paths.");
  m.def(
      "evaluate_directory",
      [](const std::filesystem::path& dir, const std::string& method, const std::string& pipeline_json, int threads) {
        EvaluationSummary s;
        {
          py::gil_scoped_release release;
          s = evaluate_directory(dir, parse_method(method), pipeline_config(pipeline_json),
                                 threads > 0 ? threads : worker_count());
        }
        py::list rows;
        for (const ResultRow& r : s.rows) {
          py::dict d;
          d["scene_id"] = r.scene_id;
          d["add"] = r.add;
          d["adds"] = r.adds;
          d["success"] = r.success;
          d["invisible_fraction"] = r.invisible_fraction;
          rows.append(d);
        }
        py::dict out;
        out["method"] = s.method;
        out["rows"] = rows;
        out["success_rate"] = s.success_rate;
        out["median_add"] = s.median_add;
        out["csv"] = format_results_csv(s.rows);
        return out;
      },
      py::arg("scene_dir"), py::arg("method") = "volume", py::arg("pipeline_json") = "", py::arg("threads") = 0);
}
