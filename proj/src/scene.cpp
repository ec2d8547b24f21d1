#include "spazer/scene.hpp"

#include "spazer/errors.hpp"
#include "spazer/ply.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace spazer {
namespace {

std::string normalize_label(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Vec3 vec3_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(what + " must be a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return j;
}

Mat4 read_pose_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pose file: " + path);
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!(in >> m(r, c))) throw NonInvertiblePose("pose file too short: " + path);
  return m;
}

void check_rigid_pose(const Mat4& c2w, const std::string& path) {
  const Mat3 r = c2w.block<3, 3>(0, 0);
  const double ortho = (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-4 || std::abs(r.determinant() - 1.0) > 1e-4)
    throw NonInvertiblePose("rotation block is not orthonormal: " + path);
  const Eigen::RowVector4d last = c2w.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-6)
    throw NonInvertiblePose("last pose row is not (0,0,0,1): " + path);
}

}  // namespace

std::array<Vec3, 9> key_points(const Aabb3& box) {
  const Vec3 h = 0.5 * box.size;
  std::array<Vec3, 9> pts;
  for (int i = 0; i < 8; ++i) {
    const double sx = (i & 4) ? 1.0 : -1.0;
    const double sy = (i & 2) ? 1.0 : -1.0;
    const double sz = (i & 1) ? 1.0 : -1.0;
    pts[i] = box.center + Vec3(sx * h.x(), sy * h.y(), sz * h.z());
  }
  pts[8] = box.center;
  return pts;
}

std::vector<DetectedObject> load_layout(const std::string& path) {
  const json j = load_json_file(path);
  if (!j.contains("objects") || !j["objects"].is_array())
    throw SchemaError("layout file lacks an 'objects' array: " + path);

  std::vector<DetectedObject> out;
  std::set<int> seen;
  for (const json& entry : j["objects"]) {
    DetectedObject obj;
    try {
      obj.id = entry.at("id").get<int>();
      obj.class_label = normalize_label(entry.at("class").get<std::string>());
      obj.bbox.center = vec3_from_json(entry.at("center"), "center");
      obj.bbox.size = vec3_from_json(entry.at("size"), "size");
    } catch (const json::exception& e) {
      throw SchemaError(std::string("bad layout entry: ") + e.what());
    }
    if (obj.id < 0) throw SchemaError("object id must be non-negative");
    if (!seen.insert(obj.id).second)
      throw DuplicateId("duplicate object id " + std::to_string(obj.id));
    if (obj.bbox.size.minCoeff() <= 0.0)
      throw NonPositiveSize("object " + std::to_string(obj.id) + " has non-positive size");
    out.push_back(std::move(obj));
  }
  return out;
}

std::vector<CameraFrame> load_camera_frames(const std::string& dir) {
  const fs::path root(dir);
  const fs::path intr_path = root / "intrinsics.json";
  if (!fs::exists(intr_path)) throw MissingIntrinsics("no intrinsics.json in " + dir);

  const json ij = load_json_file(intr_path.string());
  CameraIntrinsics intr;
  double depth_shift = 1000.0;
  try {
    intr.fx = ij.at("fx").get<double>();
    intr.fy = ij.at("fy").get<double>();
    intr.cx = ij.at("cx").get<double>();
    intr.cy = ij.at("cy").get<double>();
    intr.width = ij.at("width").get<int>();
    intr.height = ij.at("height").get<int>();
    if (ij.contains("depth_shift")) depth_shift = ij["depth_shift"].get<double>();
  } catch (const json::exception& e) {
    throw MissingIntrinsics(std::string("bad intrinsics.json: ") + e.what());
  }
  if (intr.fx <= 0 || intr.fy <= 0 || intr.cx <= 0 || intr.cy <= 0 ||
      intr.cx >= intr.width || intr.cy >= intr.height)
    throw MissingIntrinsics("intrinsics out of range in " + dir);

  const fs::path pose_dir = root / "pose";
  if (!fs::is_directory(pose_dir)) throw Error("no pose/ directory in " + dir);

  std::vector<std::string> frame_ids;
  for (const auto& e : fs::directory_iterator(pose_dir))
    if (e.path().extension() == ".txt") frame_ids.push_back(e.path().stem().string());
  std::sort(frame_ids.begin(), frame_ids.end());

  std::vector<CameraFrame> frames;
  frames.reserve(frame_ids.size());
  for (const std::string& id : frame_ids) {
    CameraFrame f;
    f.frame_id = id;
    f.intrinsics = intr;

    const Mat4 c2w = read_pose_file((pose_dir / (id + ".txt")).string());
    check_rigid_pose(c2w, id);
    f.world_to_camera = c2w.inverse();

    const fs::path depth_path = root / "depth" / (id + ".png");
    cv::Mat depth_raw = cv::imread(depth_path.string(), cv::IMREAD_UNCHANGED);
    if (depth_raw.empty() || depth_raw.channels() != 1)
      throw DepthSizeMismatch("missing or unreadable depth map: " + depth_path.string());
    if (depth_raw.cols != intr.width || depth_raw.rows != intr.height)
      cv::resize(depth_raw, depth_raw, cv::Size(intr.width, intr.height), 0, 0, cv::INTER_NEAREST);
    if (depth_raw.cols != intr.width || depth_raw.rows != intr.height)
      throw DepthSizeMismatch("depth map size mismatch for frame " + id);
    depth_raw.convertTo(f.depth, CV_32F, 1.0 / depth_shift);

    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      const fs::path p = root / "color" / (id + ext);
      if (fs::exists(p)) { f.rgb_path = p.string(); break; }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

SceneBounds compute_bounds(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloud("compute_bounds on empty cloud");
  SceneBounds b;
  b.min = cloud.points.front().position.cast<double>();
  b.max = b.min;
  for (const PointXYZRGB& p : cloud.points) {
    const Vec3 q = p.position.cast<double>();
    b.min = b.min.cwiseMin(q);
    b.max = b.max.cwiseMax(q);
  }
  return b;
}

const DetectedObject* Scene::find_object(int id) const {
  for (const DetectedObject& d : detections)
    if (d.id == id) return &d;
  return nullptr;
}

Scene load_scene(const std::string& dir) {
  Scene s;
  s.dir = dir;
  s.cloud = load_point_cloud((fs::path(dir) / "scene.ply").string());
  s.detections = load_layout((fs::path(dir) / "layout.json").string());
  s.frames = load_camera_frames(dir);
  s.bounds = compute_bounds(s.cloud);
  return s;
}

}  // namespace spazer
