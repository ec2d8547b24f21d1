#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <opencv2/core.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace spazer {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Color3 = std::array<std::uint8_t, 3>;  // r, g, b

struct PointXYZRGB {
  Eigen::Vector3f position;
  Color3 color{128, 128, 128};
};

/// Colored world-space points, the scene substrate. World frame is z-up.
struct PointCloud {
  std::vector<PointXYZRGB> points;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

struct SceneBounds {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extents() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
};

/// Axis-aligned 3D box given as center and full extents.
struct Aabb3 {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Zero();

  Vec3 min() const { return center - 0.5 * size; }
  Vec3 max() const { return center + 0.5 * size; }
  double volume() const { return size.x() * size.y() * size.z(); }
};

/// Nine probe points of a box: the 8 vertices in sign order
/// (---, --+, -+-, -++, +--, +-+, ++-, +++) followed by the center.
std::array<Vec3, 9> key_points(const Aabb3& box);

struct DetectedObject {
  int id = 0;
  Aabb3 bbox;
  std::string class_label;  // lowercase, trimmed
};

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }
};

/// One RGB-D scan frame. `world_to_camera` maps world points into the
/// camera frame (poses on disk are camera-to-world and get inverted at load).
struct CameraFrame {
  std::string frame_id;
  CameraIntrinsics intrinsics;
  Mat4 world_to_camera = Mat4::Identity();
  cv::Mat depth;  // CV_32F meters, 0 = invalid, intrinsics-sized
  std::string rgb_path;

  Vec3 camera_center() const {
    Mat4 c2w = world_to_camera.inverse();
    return c2w.block<3, 1>(0, 3);
  }
};

}  // namespace spazer
