#include "spazer/errors.hpp"
#include "spazer/eval.hpp"
#include "spazer/oracle.hpp"
#include "spazer/pipeline.hpp"
#include "spazer/ply.hpp"
#include "spazer/project.hpp"
#include "spazer/render.hpp"
#include "spazer/scene.hpp"
#include "spazer/synth.hpp"
#include "spazer/vlm.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace spazer;

namespace {

py::array mat_to_numpy(const cv::Mat& m) {
  if (m.empty()) return py::array_t<std::uint8_t>();
  cv::Mat cont = m.isContinuous() ? m : m.clone();
  if (cont.type() == CV_8UC3) {
    py::array_t<std::uint8_t> a({cont.rows, cont.cols, 3});
    std::memcpy(a.mutable_data(), cont.data, static_cast<std::size_t>(cont.total()) * 3);
    return a;
  }
  if (cont.type() == CV_8UC1) {
    py::array_t<std::uint8_t> a({cont.rows, cont.cols});
    std::memcpy(a.mutable_data(), cont.data, cont.total());
    return a;
  }
  if (cont.type() == CV_32FC1) {
    py::array_t<float> a({cont.rows, cont.cols});
    std::memcpy(a.mutable_data(), cont.data, cont.total() * sizeof(float));
    return a;
  }
  throw std::runtime_error("unsupported cv::Mat type for numpy conversion");
}

cv::Mat numpy_to_mat(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() == 3 && a.shape(2) == 3) {
    cv::Mat m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), CV_8UC3);
    std::memcpy(m.data, a.data(), static_cast<std::size_t>(a.size()));
    return m;
  }
  if (a.ndim() == 2) {
    cv::Mat m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), CV_8UC1);
    std::memcpy(m.data, a.data(), static_cast<std::size_t>(a.size()));
    return m;
  }
  throw std::runtime_error("expected an HxWx3 or HxW uint8 array");
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<Mark> marks_from_py(const std::vector<std::pair<int, std::pair<double, double>>>& marks) {
  std::vector<Mark> out;
  out.reserve(marks.size());
  for (const auto& [id, px] : marks) out.emplace_back(id, cv::Point2d(px.first, px.second));
  return out;
}

}  // namespace

PYBIND11_MODULE(_spazer, m) {
  m.doc() = "zero-shot 3D visual grounding pipeline (C++ core)";

  py::register_exception<Error>(m, "SpazerError");

  // --- domain types ---
  py::class_<Aabb3>(m, "Aabb3")
      .def(py::init<>())
      .def(py::init([](const Vec3& center, const Vec3& size) {
             return Aabb3{center, size};
           }),
           py::arg("center"), py::arg("size"))
      .def_readwrite("center", &Aabb3::center)
      .def_readwrite("size", &Aabb3::size)
      .def("min", &Aabb3::min)
      .def("max", &Aabb3::max)
      .def("volume", &Aabb3::volume);

  py::class_<SceneBounds>(m, "SceneBounds")
      .def(py::init<>())
      .def_readwrite("min", &SceneBounds::min)
      .def_readwrite("max", &SceneBounds::max)
      .def("extents", &SceneBounds::extents)
      .def("center", &SceneBounds::center);

  py::class_<DetectedObject>(m, "DetectedObject")
      .def(py::init<>())
      .def_readwrite("id", &DetectedObject::id)
      .def_readwrite("bbox", &DetectedObject::bbox)
      .def_readwrite("class_label", &DetectedObject::class_label);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def("matrix", &CameraIntrinsics::matrix);

  py::class_<CameraFrame>(m, "CameraFrame")
      .def_readonly("frame_id", &CameraFrame::frame_id)
      .def_readonly("intrinsics", &CameraFrame::intrinsics)
      .def_readonly("world_to_camera", &CameraFrame::world_to_camera)
      .def_readonly("rgb_path", &CameraFrame::rgb_path)
      .def("camera_center", &CameraFrame::camera_center)
      .def("depth", [](const CameraFrame& f) { return mat_to_numpy(f.depth); });

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init<>())
      .def("__len__", &PointCloud::size)
      .def("positions",
           [](const PointCloud& c) {
             py::array_t<float> a({static_cast<py::ssize_t>(c.size()), py::ssize_t(3)});
             auto r = a.mutable_unchecked<2>();
             for (py::ssize_t i = 0; i < r.shape(0); ++i)
               for (int j = 0; j < 3; ++j)
                 r(i, j) = c.points[static_cast<std::size_t>(i)].position[j];
             return a;
           })
      .def("colors", [](const PointCloud& c) {
        py::array_t<std::uint8_t> a({static_cast<py::ssize_t>(c.size()), py::ssize_t(3)});
        auto r = a.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < r.shape(0); ++i)
          for (int j = 0; j < 3; ++j)
            r(i, j) = c.points[static_cast<std::size_t>(i)].color[static_cast<std::size_t>(j)];
        return a;
      });

  py::class_<Scene>(m, "Scene")
      .def_readonly("cloud", &Scene::cloud)
      .def_readonly("detections", &Scene::detections)
      .def_readonly("frames", &Scene::frames)
      .def_readonly("bounds", &Scene::bounds)
      .def_readonly("dir", &Scene::dir);

  // --- ingestion ---
  m.def("load_point_cloud", &load_point_cloud, py::arg("path"));
  m.def("save_point_cloud", &save_point_cloud, py::arg("cloud"), py::arg("path"));
  m.def("load_layout", &load_layout, py::arg("path"));
  m.def("load_camera_frames", &load_camera_frames, py::arg("dir"));
  m.def("load_scene", &load_scene, py::arg("dir"));
  m.def("compute_bounds", &compute_bounds, py::arg("cloud"));
  m.def("key_points", [](const Aabb3& box) {
    const auto pts = key_points(box);
    py::array_t<double> a({py::ssize_t(9), py::ssize_t(3)});
    auto r = a.mutable_unchecked<2>();
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = pts[static_cast<std::size_t>(i)][j];
    return a;
  });

  // --- rendering ---
  py::class_<RenderCamera>(m, "RenderCamera")
      .def(py::init<>())
      .def_readwrite("position", &RenderCamera::position)
      .def_readwrite("target", &RenderCamera::target)
      .def_readwrite("up_hint", &RenderCamera::up_hint)
      .def_readwrite("fov_deg", &RenderCamera::fov_deg)
      .def_readwrite("width", &RenderCamera::width)
      .def_readwrite("height", &RenderCamera::height)
      .def("focal_px", &RenderCamera::focal_px);

  m.def("bev_camera", &bev_camera, py::arg("bounds"), py::arg("fov_deg") = 60.0,
        py::arg("width") = 1024, py::arg("height") = 1024);
  m.def("ring_cameras", &ring_cameras, py::arg("n"), py::arg("bounds"),
        py::arg("fov_deg") = 60.0, py::arg("width") = 1024, py::arg("height") = 1024);
  m.def(
      "world_to_image",
      [](const RenderCamera& cam, const Vec3& p) -> py::object {
        const auto px = world_to_image(cam, p);
        if (!px) return py::none();
        return py::make_tuple(px->u, px->v, px->depth);
      },
      py::arg("camera"), py::arg("point"));
  m.def(
      "render",
      [](const PointCloud& cloud, const RenderCamera& cam, double point_size_m) {
        return mat_to_numpy(render(cloud, cam, point_size_m));
      },
      py::arg("cloud"), py::arg("camera"), py::arg("point_size_m") = 0.02);
  m.def(
      "annotate",
      [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> image,
         const std::vector<std::pair<int, std::pair<double, double>>>& marks,
         int view_index) {
        return mat_to_numpy(annotate(numpy_to_mat(image), marks_from_py(marks), view_index));
      },
      py::arg("image"), py::arg("marks"), py::arg("view_index"));

  // --- projection ---
  py::class_<ProjectedPoint>(m, "ProjectedPoint")
      .def_readonly("u", &ProjectedPoint::u)
      .def_readonly("v", &ProjectedPoint::v)
      .def_readonly("depth_cam", &ProjectedPoint::depth_cam)
      .def_readonly("in_front", &ProjectedPoint::in_front);

  py::class_<KeyframeAssignment>(m, "KeyframeAssignment")
      .def_readonly("object_id", &KeyframeAssignment::object_id)
      .def_readonly("frame_id", &KeyframeAssignment::frame_id)
      .def_readonly("visible_count", &KeyframeAssignment::visible_count)
      .def_property_readonly("crop_rect", [](const KeyframeAssignment& k) {
        return py::make_tuple(k.crop_rect.u_min, k.crop_rect.v_min, k.crop_rect.u_max,
                              k.crop_rect.v_max);
      });

  m.def(
      "project_points",
      [](const CameraIntrinsics& k, const Mat4& t_cw, const std::vector<Vec3>& pts) {
        return project_points(k, t_cw, pts);
      },
      py::arg("intrinsics"), py::arg("world_to_camera"), py::arg("points"));
  m.def("count_visible", &count_visible, py::arg("box"), py::arg("frame"),
        py::arg("tol_abs") = 0.10, py::arg("rel_tol") = 0.05);
  m.def("select_keyframe", &select_keyframe, py::arg("object_id"), py::arg("box"),
        py::arg("frames"), py::arg("tol_abs") = 0.10, py::arg("rel_tol") = 0.05);

  // --- metrics ---
  m.def("iou_aabb", &iou_aabb, py::arg("a"), py::arg("b"));
  m.def("similarity", &similarity, py::arg("a"), py::arg("b"));
  m.def(
      "parse_json_payload",
      [](const std::string& text) { return json_to_py(parse_json_payload(text)); },
      py::arg("text"));

  // --- pipeline ---
  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("n_views", &PipelineConfig::n_views)
      .def_readwrite("top_k", &PipelineConfig::top_k)
      .def_readwrite("tau", &PipelineConfig::tau)
      .def_readwrite("fov_deg", &PipelineConfig::fov_deg)
      .def_readwrite("depth_tol_m", &PipelineConfig::depth_tol_m)
      .def_readwrite("rel_depth_tol", &PipelineConfig::rel_depth_tol)
      .def_readwrite("image_size", &PipelineConfig::image_size)
      .def_readwrite("point_size_m", &PipelineConfig::point_size_m)
      .def_readwrite("temperature", &PipelineConfig::temperature)
      .def_readwrite("max_attempts", &PipelineConfig::max_attempts);

  py::class_<GroundingQuery>(m, "GroundingQuery")
      .def(py::init<>())
      .def(py::init([](const std::string& text) {
             GroundingQuery q;
             q.text = text;
             return q;
           }),
           py::arg("text"))
      .def_readwrite("text", &GroundingQuery::text)
      .def_readwrite("gt_id", &GroundingQuery::gt_id)
      .def_readwrite("gt_box", &GroundingQuery::gt_box)
      .def_readwrite("splits", &GroundingQuery::splits);

  m.def("load_queries_jsonl", &load_queries_jsonl, py::arg("path"));

  py::class_<VlmBackend, std::shared_ptr<VlmBackend>>(m, "VlmBackend")
      .def("name", &VlmBackend::name);
  py::class_<ScriptedBackend, VlmBackend, std::shared_ptr<ScriptedBackend>>(
      m, "ScriptedBackend")
      .def(py::init<std::vector<std::string>>(), py::arg("responses"))
      .def("reset", &ScriptedBackend::reset)
      .def("calls", &ScriptedBackend::calls);
  py::class_<OracleBackend, VlmBackend, std::shared_ptr<OracleBackend>>(m, "OracleBackend")
      .def(py::init<const Scene&, std::vector<GroundingQuery>, PipelineConfig>(),
           py::arg("scene"), py::arg("queries"), py::arg("config") = PipelineConfig{});
  py::class_<RemoteConfig>(m, "RemoteConfig")
      .def(py::init<>())
      .def_readwrite("endpoint", &RemoteConfig::endpoint)
      .def_readwrite("model", &RemoteConfig::model)
      .def_readwrite("api_key_env", &RemoteConfig::api_key_env)
      .def_readwrite("timeout_s", &RemoteConfig::timeout_s)
      .def_readwrite("retry_base_s", &RemoteConfig::retry_base_s)
      .def_readwrite("max_image_px", &RemoteConfig::max_image_px);
  py::class_<RemoteBackend, VlmBackend, std::shared_ptr<RemoteBackend>>(m, "RemoteBackend")
      .def(py::init<RemoteConfig>(), py::arg("config"));

  m.def(
      "ground",
      [](const Scene& scene, const GroundingQuery& query, VlmBackend& backend,
         const PipelineConfig& config) {
        auto [result, trace] = ground(scene, query, config, backend);
        py::dict out;
        out["final_id"] = result.final_id;
        out["box"] = py::cast(result.box);
        out["trace"] = json_to_py(trace_to_json(trace, config));
        return out;
      },
      py::arg("scene"), py::arg("query"), py::arg("backend"),
      py::arg("config") = PipelineConfig{});

  m.def(
      "run_evaluate",
      [](const Scene& scene, const std::vector<GroundingQuery>& queries,
         VlmBackend& backend, const PipelineConfig& config, const std::string& out_dir,
         int parallel) {
        EvaluateOptions opts;
        opts.out_dir = out_dir;
        opts.parallel = parallel;
        return json_to_py(run_evaluate(scene, queries, config, backend, opts).to_json());
      },
      py::arg("scene"), py::arg("queries"), py::arg("backend"),
      py::arg("config") = PipelineConfig{}, py::arg("out_dir") = "out",
      py::arg("parallel") = 1);

  // --- synth ---
  py::class_<synth::SynthSpec>(m, "SynthSpec")
      .def_readwrite("seed", &synth::SynthSpec::seed)
      .def_readwrite("room_size", &synth::SynthSpec::room_size)
      .def_readwrite("point_spacing_m", &synth::SynthSpec::point_spacing_m);
  m.def("make_default_spec", &synth::make_default_spec, py::arg("seed") = 0);
  m.def("generate_synth_scene", &synth::generate, py::arg("spec"), py::arg("out_dir"));
}
