#include "spazer/render.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace spazer {
namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr int kMaxSplatRadius = 7;

void draw_outlined_text(cv::Mat& img, const std::string& text, cv::Point org,
                        double scale, int thickness) {
  // white underlay then red text; LINE_8 keeps rasterization deterministic
  cv::putText(img, text, org, cv::FONT_HERSHEY_SIMPLEX, scale,
              cv::Scalar(255, 255, 255), thickness + 3, cv::LINE_8);
  cv::putText(img, text, org, cv::FONT_HERSHEY_SIMPLEX, scale,
              cv::Scalar(0, 0, 255), thickness, cv::LINE_8);
}

}  // namespace

double RenderCamera::focal_px() const {
  return (height / 2.0) / std::tan(0.5 * fov_deg * kDegToRad);
}

std::optional<PixelPoint> world_to_image(const RenderCamera& camera, const Vec3& point) {
  const Vec3 rel = point - camera.position;
  const Vec3 f = camera.forward();
  const Vec3 r = camera.right();
  const Vec3 u = camera.up();

  const double z = rel.dot(f);
  if (z <= 0.0) return std::nullopt;
  const double x = rel.dot(r);
  const double y = -rel.dot(u);  // image v grows downward

  const double focal = camera.focal_px();
  PixelPoint p;
  p.u = camera.width / 2.0 + focal * x / z;
  p.v = camera.height / 2.0 + focal * y / z;
  p.depth = z;
  return p;
}

RenderCamera bev_camera(const SceneBounds& bounds, double fov_deg, int width, int height) {
  const Vec3 ext = bounds.extents();
  const double span = std::max(ext.x(), ext.y());
  double d = 0.5 * span / std::tan(0.5 * fov_deg * kDegToRad);
  if (!(d > 0.0)) d = 1.0;  // degenerate scene: l_x = l_y = 0

  RenderCamera cam;
  cam.target = bounds.center();
  cam.position = cam.target + Vec3(0, 0, d);
  cam.up_hint = Vec3(0, 1, 0);
  cam.fov_deg = fov_deg;
  cam.width = width;
  cam.height = height;
  return cam;
}

std::vector<RenderCamera> ring_cameras(int n, const SceneBounds& bounds, double fov_deg,
                                       int width, int height) {
  const Vec3 ext = bounds.extents();
  const double span = std::max(ext.x(), ext.y());
  double d = 0.5 * span / std::tan(0.5 * fov_deg * kDegToRad);
  if (!(d > 0.0)) d = 1.0;

  constexpr double kElevationRad = 45.0 * kDegToRad;
  const double horiz = d * std::cos(kElevationRad);
  const double rise = d * std::sin(kElevationRad);

  std::vector<RenderCamera> cams;
  cams.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    // azimuth 0 = +y ("front"), increasing clockwise viewed from above
    const double az = k * (360.0 / n) * kDegToRad;
    RenderCamera cam;
    cam.target = bounds.center();
    cam.position = cam.target + Vec3(horiz * std::sin(az), horiz * std::cos(az), rise);
    cam.up_hint = Vec3(0, 0, 1);
    cam.fov_deg = fov_deg;
    cam.width = width;
    cam.height = height;
    cams.push_back(cam);
  }
  return cams;
}

cv::Mat render(const PointCloud& cloud, const RenderCamera& camera, double point_size_m) {
  cv::Mat img(camera.height, camera.width, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::Mat_<float> zbuf(camera.height, camera.width,
                       std::numeric_limits<float>::infinity());

  const Vec3 f = camera.forward();
  const Vec3 r = camera.right();
  const Vec3 u = camera.up();
  const double focal = camera.focal_px();
  const double cx = camera.width / 2.0;
  const double cy = camera.height / 2.0;

  for (const PointXYZRGB& pt : cloud.points) {
    const Vec3 rel = pt.position.cast<double>() - camera.position;
    const double z = rel.dot(f);
    if (z <= 0.0) continue;
    const double pu = cx + focal * rel.dot(r) / z;
    const double pv = cy - focal * rel.dot(u) / z;

    const int ui = static_cast<int>(std::lround(pu));
    const int vi = static_cast<int>(std::lround(pv));
    const int radius = std::clamp(static_cast<int>(std::lround(point_size_m * focal / z)),
                                  1, kMaxSplatRadius);
    if (ui + radius < 0 || ui - radius >= camera.width ||
        vi + radius < 0 || vi - radius >= camera.height)
      continue;

    const float zf = static_cast<float>(z);
    const cv::Vec3b bgr(pt.color[2], pt.color[1], pt.color[0]);
    for (int dy = -radius; dy <= radius; ++dy) {
      const int y = vi + dy;
      if (y < 0 || y >= camera.height) continue;
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius * radius) continue;
        const int x = ui + dx;
        if (x < 0 || x >= camera.width) continue;
        if (zf < zbuf(y, x)) {
          zbuf(y, x) = zf;
          img.at<cv::Vec3b>(y, x) = bgr;
        }
      }
    }
  }
  return img;
}

cv::Mat annotate(const cv::Mat& image, const std::vector<Mark>& marks, int view_index) {
  cv::Mat out = image.clone();
  const double scale = std::max(0.45, out.rows / 1400.0);
  const int thickness = out.rows >= 700 ? 2 : 1;

  for (const Mark& m : marks) {
    const cv::Point2d& px = m.second;
    if (px.x < 0 || px.y < 0 || px.x >= out.cols || px.y >= out.rows) continue;
    const std::string label = std::to_string(m.first);
    int baseline = 0;
    const cv::Size ts = cv::getTextSize(label, cv::FONT_HERSHEY_SIMPLEX, scale,
                                        thickness, &baseline);
    const cv::Point org(static_cast<int>(std::lround(px.x)) - ts.width / 2,
                        static_cast<int>(std::lround(px.y)) + ts.height / 2);
    draw_outlined_text(out, label, org, scale, thickness);
  }

  const double idx_scale = scale * 1.4;
  int baseline = 0;
  const cv::Size ts = cv::getTextSize(std::to_string(view_index), cv::FONT_HERSHEY_SIMPLEX,
                                      idx_scale, thickness + 1, &baseline);
  draw_outlined_text(out, std::to_string(view_index), cv::Point(8, ts.height + 8),
                     idx_scale, thickness + 1);
  return out;
}

std::vector<RenderedView> render_holistic_views(const PointCloud& cloud,
                                                const SceneBounds& bounds, int n_views,
                                                double fov_deg, int image_size,
                                                double point_size_m) {
  std::vector<RenderedView> views;
  views.reserve(static_cast<std::size_t>(n_views) + 1);

  RenderedView bev;
  bev.view_index = 0;
  bev.camera = bev_camera(bounds, fov_deg, image_size, image_size);
  bev.image = annotate(render(cloud, bev.camera, point_size_m), {}, 0);
  views.push_back(std::move(bev));

  const auto ring = ring_cameras(n_views, bounds, fov_deg, image_size, image_size);
  for (int k = 0; k < n_views; ++k) {
    RenderedView v;
    v.view_index = k + 1;
    v.camera = ring[static_cast<std::size_t>(k)];
    v.image = annotate(render(cloud, v.camera, point_size_m), {}, v.view_index);
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace spazer
