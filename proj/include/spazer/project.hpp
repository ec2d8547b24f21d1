#pragma once

#include "spazer/types.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spazer {

struct ProjectedPoint {
  double u = 0;
  double v = 0;
  double depth_cam = 0;  // z_c, meters
  bool in_front = false;  // u, v only meaningful when true
};

/// p_cam = T_cw * (x,y,z,1); u = fx*x_c/z_c + cx, v = fy*y_c/z_c + cy.
ProjectedPoint project_point(const CameraIntrinsics& k, const Mat4& world_to_camera,
                             const Vec3& point);
std::vector<ProjectedPoint> project_points(const CameraIntrinsics& k,
                                           const Mat4& world_to_camera,
                                           std::span<const Vec3> points);

/// Depth-map visibility: in front, inside the image, valid depth at the
/// nearest pixel, and |z_c - depth| <= max(tol_abs, rel_tol * z_c).
bool visible(const ProjectedPoint& pp, const CameraFrame& frame, double tol_abs,
             double rel_tol);

/// Number of the box's 9 key points visible in the frame.
int count_visible(const Aabb3& box, const CameraFrame& frame, double tol_abs,
                  double rel_tol);

struct CropRect {
  int u_min = 0, v_min = 0, u_max = 0, v_max = 0;  // inclusive, image-clamped
};

struct KeyframeAssignment {
  int object_id = 0;
  std::string frame_id;
  int visible_count = 0;
  CropRect crop_rect;
};

/// Frame with the most visible key points; ties broken by camera-to-box
/// distance, then frame_id. crop_rect bounds the visible projections with
/// 10% padding. Throws NoVisibleFrame when every count is zero.
KeyframeAssignment select_keyframe(int object_id, const Aabb3& box,
                                   const std::vector<CameraFrame>& frames,
                                   double tol_abs, double rel_tol);

/// Stitches id-labeled crops into a ceil(sqrt(N))-column grid of square
/// cells, ids ascending. Throws EmptyCrops.
cv::Mat build_visual_table(const std::vector<std::pair<int, cv::Mat>>& crops,
                           int cell_px = 224);

}  // namespace spazer
