#pragma once

#include "spazer/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace spazer {

/// Perspective render camera. fov_deg is the vertical field of view of the
/// rasterizer; the same angle divides max(l_x, l_y) in the holistic-view
/// distance formula (square default images make the two readings coincide).
struct RenderCamera {
  Vec3 position = Vec3(0, 0, 1);
  Vec3 target = Vec3::Zero();
  Vec3 up_hint = Vec3(0, 0, 1);
  double fov_deg = 60.0;
  int width = 1024;
  int height = 1024;

  Vec3 forward() const { return (target - position).normalized(); }
  Vec3 right() const { return forward().cross(up_hint).normalized(); }
  Vec3 up() const { return right().cross(forward()); }
  double focal_px() const;
};

struct PixelPoint {
  double u = 0;
  double v = 0;
  double depth = 0;  // camera-space depth, meters
};

/// The exact projection the rasterizer uses. Returns nullopt when the point
/// is behind the camera (camera-space depth <= 0).
std::optional<PixelPoint> world_to_image(const RenderCamera& camera, const Vec3& point);

/// Top-down camera above the scene center at distance
/// d = 0.5 * max(l_x, l_y) / tan(fov/2); d = 1 m when the scene is degenerate.
RenderCamera bev_camera(const SceneBounds& bounds, double fov_deg, int width, int height);

/// n cameras on a circle above the scene: azimuth k*360/n (0 = +y, clockwise
/// from above), elevation 45 degrees, distance d from the center.
std::vector<RenderCamera> ring_cameras(int n, const SceneBounds& bounds, double fov_deg,
                                       int width, int height);

/// Point-splat rasterizer with a per-pixel z-buffer; nearest point wins,
/// points behind the camera are culled, background is white. Returns an
/// 8-bit BGR image.
cv::Mat render(const PointCloud& cloud, const RenderCamera& camera,
               double point_size_m = 0.02);

using Mark = std::pair<int, cv::Point2d>;  // object id + pixel position

/// Draws each id in red with a white outline at its pixel (marks outside the
/// image are skipped) and stamps the view index in the top-left corner.
/// The input image is copied, never modified.
cv::Mat annotate(const cv::Mat& image, const std::vector<Mark>& marks, int view_index);

struct RenderedView {
  int view_index = 0;  // 0 = BEV
  RenderCamera camera;
  cv::Mat image;  // index label stamped; anchor marks added at screening time
  std::vector<Mark> annotations;
};

/// BEV (index 0) plus n ring views, each stamped with its index.
std::vector<RenderedView> render_holistic_views(const PointCloud& cloud,
                                                const SceneBounds& bounds, int n_views,
                                                double fov_deg, int image_size,
                                                double point_size_m = 0.02);

}  // namespace spazer
