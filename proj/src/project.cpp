#include "spazer/project.hpp"

#include "spazer/errors.hpp"
#include "spazer/scene.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace spazer {

ProjectedPoint project_point(const CameraIntrinsics& k, const Mat4& world_to_camera,
                             const Vec3& point) {
  const Eigen::Vector4d cam = world_to_camera * point.homogeneous();
  ProjectedPoint pp;
  pp.depth_cam = cam.z();
  pp.in_front = cam.z() > 0.0;
  if (pp.in_front) {
    pp.u = k.fx * cam.x() / cam.z() + k.cx;
    pp.v = k.fy * cam.y() / cam.z() + k.cy;
  }
  return pp;
}

std::vector<ProjectedPoint> project_points(const CameraIntrinsics& k,
                                           const Mat4& world_to_camera,
                                           std::span<const Vec3> points) {
  std::vector<ProjectedPoint> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(project_point(k, world_to_camera, p));
  return out;
}

bool visible(const ProjectedPoint& pp, const CameraFrame& frame, double tol_abs,
             double rel_tol) {
  if (!pp.in_front) return false;
  const int u = static_cast<int>(std::lround(pp.u));
  const int v = static_cast<int>(std::lround(pp.v));
  if (u < 0 || v < 0 || u >= frame.intrinsics.width || v >= frame.intrinsics.height)
    return false;
  const double d = frame.depth.at<float>(v, u);
  if (d <= 0.0) return false;
  return std::abs(pp.depth_cam - d) <= std::max(tol_abs, rel_tol * pp.depth_cam);
}

int count_visible(const Aabb3& box, const CameraFrame& frame, double tol_abs,
                  double rel_tol) {
  const auto pts = key_points(box);
  int n = 0;
  for (const Vec3& p : pts) {
    const ProjectedPoint pp = project_point(frame.intrinsics, frame.world_to_camera, p);
    if (visible(pp, frame, tol_abs, rel_tol)) ++n;
  }
  return n;
}

KeyframeAssignment select_keyframe(int object_id, const Aabb3& box,
                                   const std::vector<CameraFrame>& frames,
                                   double tol_abs, double rel_tol) {
  const CameraFrame* best = nullptr;
  int best_count = 0;
  double best_dist = std::numeric_limits<double>::infinity();

  for (const CameraFrame& f : frames) {
    const int count = count_visible(box, f, tol_abs, rel_tol);
    if (count == 0) continue;
    const double dist = (f.camera_center() - box.center).norm();
    const bool wins = count > best_count ||
                      (count == best_count && dist < best_dist) ||
                      (count == best_count && dist == best_dist && best &&
                       f.frame_id < best->frame_id);
    if (wins) {
      best = &f;
      best_count = count;
      best_dist = dist;
    }
  }
  if (!best) throw NoVisibleFrame("no frame sees object " + std::to_string(object_id));

  double u_min = std::numeric_limits<double>::infinity(), v_min = u_min;
  double u_max = -u_min, v_max = -u_min;
  for (const Vec3& p : key_points(box)) {
    const ProjectedPoint pp = project_point(best->intrinsics, best->world_to_camera, p);
    if (!visible(pp, *best, tol_abs, rel_tol)) continue;
    u_min = std::min(u_min, pp.u);
    u_max = std::max(u_max, pp.u);
    v_min = std::min(v_min, pp.v);
    v_max = std::max(v_max, pp.v);
  }
  const double pad_u = std::max(0.1 * (u_max - u_min), 4.0);
  const double pad_v = std::max(0.1 * (v_max - v_min), 4.0);

  KeyframeAssignment a;
  a.object_id = object_id;
  a.frame_id = best->frame_id;
  a.visible_count = best_count;
  a.crop_rect.u_min = std::clamp(static_cast<int>(std::floor(u_min - pad_u)), 0,
                                 best->intrinsics.width - 1);
  a.crop_rect.u_max = std::clamp(static_cast<int>(std::ceil(u_max + pad_u)), 0,
                                 best->intrinsics.width - 1);
  a.crop_rect.v_min = std::clamp(static_cast<int>(std::floor(v_min - pad_v)), 0,
                                 best->intrinsics.height - 1);
  a.crop_rect.v_max = std::clamp(static_cast<int>(std::ceil(v_max + pad_v)), 0,
                                 best->intrinsics.height - 1);
  return a;
}

cv::Mat build_visual_table(const std::vector<std::pair<int, cv::Mat>>& crops, int cell_px) {
  if (crops.empty()) throw EmptyCrops("visual table needs at least one crop");

  std::vector<std::pair<int, cv::Mat>> sorted(crops.begin(), crops.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const int n = static_cast<int>(sorted.size());
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;

  cv::Mat table(rows * cell_px, cols * cell_px, CV_8UC3, cv::Scalar(255, 255, 255));
  for (int i = 0; i < n; ++i) {
    const int r = i / cols;
    const int c = i % cols;
    const cv::Mat& crop = sorted[static_cast<std::size_t>(i)].second;
    if (!crop.empty()) {
      const double s = std::min(static_cast<double>(cell_px) / crop.cols,
                                static_cast<double>(cell_px) / crop.rows);
      cv::Mat resized;
      cv::resize(crop, resized,
                 cv::Size(std::max(1, static_cast<int>(crop.cols * s)),
                          std::max(1, static_cast<int>(crop.rows * s))),
                 0, 0, cv::INTER_AREA);
      const int x0 = c * cell_px + (cell_px - resized.cols) / 2;
      const int y0 = r * cell_px + (cell_px - resized.rows) / 2;
      resized.copyTo(table(cv::Rect(x0, y0, resized.cols, resized.rows)));
    }
    const std::string label = std::to_string(sorted[static_cast<std::size_t>(i)].first);
    const cv::Point org(c * cell_px + 6, r * cell_px + 26);
    cv::putText(table, label, org, cv::FONT_HERSHEY_SIMPLEX, 0.8,
                cv::Scalar(255, 255, 255), 5, cv::LINE_8);
    cv::putText(table, label, org, cv::FONT_HERSHEY_SIMPLEX, 0.8,
                cv::Scalar(0, 0, 255), 2, cv::LINE_8);
    cv::rectangle(table, cv::Rect(c * cell_px, r * cell_px, cell_px, cell_px),
                  cv::Scalar(200, 200, 200), 1, cv::LINE_8);
  }
  return table;
}

}  // namespace spazer
