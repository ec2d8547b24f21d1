#include "spazer/project.hpp"

#include "spazer/errors.hpp"
#include "spazer/scene.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <random>

using namespace spazer;

namespace {

// Matrix-free scalar reference for the pinhole pipeline. Must not share a
// code path (or Eigen) with project_point.
struct ScalarProjection {
  double u = 0, v = 0, z = 0;
  bool in_front = false;
};

ScalarProjection scalar_project(const CameraIntrinsics& k, const double t[4][4],
                                double x, double y, double z) {
  const double xc = t[0][0] * x + t[0][1] * y + t[0][2] * z + t[0][3];
  const double yc = t[1][0] * x + t[1][1] * y + t[1][2] * z + t[1][3];
  const double zc = t[2][0] * x + t[2][1] * y + t[2][2] * z + t[2][3];
  ScalarProjection s;
  s.z = zc;
  s.in_front = zc > 0.0;
  if (s.in_front) {
    s.u = k.fx * xc / zc + k.cx;
    s.v = k.fy * yc / zc + k.cy;
  }
  return s;
}

Mat4 random_rigid(std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::Quaterniond q(unit(rng), unit(rng), unit(rng), unit(rng));
  q.normalize();
  Mat4 t = Mat4::Identity();
  t.block<3, 3>(0, 0) = q.toRotationMatrix();
  t.block<3, 1>(0, 3) = Vec3(unit(rng) * 2, unit(rng) * 2, unit(rng) * 2);
  return t;
}

CameraFrame make_test_frame(const std::string& id, const Mat4& w2c, int w, int h,
                            float depth_fill) {
  CameraFrame f;
  f.frame_id = id;
  f.intrinsics = CameraIntrinsics{100, 100, w / 2.0, h / 2.0, w, h};
  f.world_to_camera = w2c;
  f.depth = cv::Mat(h, w, CV_32F, cv::Scalar(depth_fill));
  return f;
}

}  // namespace

TEST_CASE("projection closed forms") {
  const CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  const Mat4 eye = Mat4::Identity();

  const ProjectedPoint on_axis = project_point(k, eye, Vec3(0, 0, 1));
  CHECK(on_axis.in_front);
  CHECK(on_axis.u == doctest::Approx(50.0));
  CHECK(on_axis.v == doctest::Approx(50.0));
  CHECK(on_axis.depth_cam == doctest::Approx(1.0));

  const ProjectedPoint off = project_point(k, eye, Vec3(0.5, 0, 1));
  CHECK(off.u == doctest::Approx(100.0));
  CHECK(off.v == doctest::Approx(50.0));

  CHECK_FALSE(project_point(k, eye, Vec3(0, 0, -1)).in_front);
}

TEST_CASE("projection matches the scalar oracle on random rigid poses") {
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  const CameraIntrinsics k{480, 520, 310, 245, 640, 480};

  for (int i = 0; i < 300; ++i) {
    const Mat4 t = random_rigid(rng);
    double ts[4][4];
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) ts[r][c] = t(r, c);

    const Vec3 p(coord(rng), coord(rng), coord(rng));
    const ProjectedPoint got = project_point(k, t, p);
    const ScalarProjection want = scalar_project(k, ts, p.x(), p.y(), p.z());
    CHECK(got.in_front == want.in_front);
    if (want.in_front) {
      CHECK(std::abs(got.u - want.u) <= 1e-6 * std::max(1.0, std::abs(want.u)));
      CHECK(std::abs(got.v - want.v) <= 1e-6 * std::max(1.0, std::abs(want.v)));
      CHECK(got.depth_cam == doctest::Approx(want.z).epsilon(1e-9));
    }
  }
}

TEST_CASE("projection is invariant under a shared rigid transform") {
  std::mt19937 rng(202);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  const CameraIntrinsics k{300, 300, 160, 120, 320, 240};

  for (int i = 0; i < 100; ++i) {
    const Mat4 t_cw = random_rigid(rng);
    const Mat4 m = random_rigid(rng);
    const Vec3 p(coord(rng), coord(rng), coord(rng));

    const ProjectedPoint a = project_point(k, t_cw, p);
    const Vec3 p2 = (m * p.homogeneous()).head<3>();
    const ProjectedPoint b = project_point(k, t_cw * m.inverse(), p2);
    CHECK(a.in_front == b.in_front);
    if (a.in_front) {
      CHECK(std::abs(a.u - b.u) <= 1e-6 * std::max(1.0, std::abs(a.u)));
      CHECK(std::abs(a.v - b.v) <= 1e-6 * std::max(1.0, std::abs(a.v)));
    }
  }
}

TEST_CASE("visibility rules") {
  const CameraFrame frame = make_test_frame("f", Mat4::Identity(), 100, 100, 1.0f);

  ProjectedPoint pp;
  pp.in_front = true;
  pp.u = 50;
  pp.v = 50;
  pp.depth_cam = 1.0;
  CHECK(visible(pp, frame, 0.1, 0.05));

  pp.depth_cam = 2.0;  // occluder at 1.0 in front of the point
  CHECK_FALSE(visible(pp, frame, 0.1, 0.05));

  pp.depth_cam = 1.0;
  pp.u = -3;
  CHECK_FALSE(visible(pp, frame, 0.1, 0.05));

  pp.u = 50;
  pp.in_front = false;
  CHECK_FALSE(visible(pp, frame, 0.1, 0.05));
}

TEST_CASE("visibility: zero depth means invalid") {
  const CameraFrame frame = make_test_frame("f", Mat4::Identity(), 64, 64, 0.0f);
  ProjectedPoint pp;
  pp.in_front = true;
  pp.u = 32;
  pp.v = 32;
  pp.depth_cam = 0.05;
  CHECK_FALSE(visible(pp, frame, 10.0, 0.0));
}

TEST_CASE("visibility is monotone in the tolerance") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> depth(0.2, 4.0);
  const CameraFrame frame = make_test_frame("f", Mat4::Identity(), 64, 64, 1.7f);
  for (int i = 0; i < 200; ++i) {
    ProjectedPoint pp;
    pp.in_front = true;
    pp.u = 30;
    pp.v = 30;
    pp.depth_cam = depth(rng);
    for (double tol = 0.05; tol <= 1.0; tol += 0.05) {
      if (visible(pp, frame, tol, 0.0)) {
        CHECK(visible(pp, frame, tol + 0.3, 0.0));
        break;
      }
    }
  }
}

TEST_CASE("count_visible: box behind the camera is zero") {
  Mat4 w2c = Mat4::Identity();
  w2c(2, 3) = -5.0;  // camera looking at +z, box sits at z < camera
  const CameraFrame frame = make_test_frame("f", w2c, 100, 100, 1.0f);
  const Aabb3 box{Vec3(0, 0, 1), Vec3(0.5, 0.5, 0.5)};
  CHECK(count_visible(box, frame, 0.1, 0.05) == 0);
}

TEST_CASE("count_visible: box with exact depth is fully visible") {
  // small box 2 m straight ahead, depth map filled with the box distance
  const CameraFrame frame = make_test_frame("f", Mat4::Identity(), 200, 200, 2.0f);
  const Aabb3 box{Vec3(0, 0, 2), Vec3(0.1, 0.1, 0.1)};
  CHECK(count_visible(box, frame, 0.1, 0.05) == 9);
}

TEST_CASE("select_keyframe: argmax, tie-breaks and permutation invariance") {
  // camera A at origin sees the box dead-on; camera B is shifted so part of
  // the box projects out of frame; camera C matches A but sits farther away
  const Aabb3 box{Vec3(0, 0, 2), Vec3(0.2, 0.2, 0.2)};

  Mat4 far_pose = Mat4::Identity();
  far_pose(2, 3) = 1.0;  // camera center 1 m farther from the box
  Mat4 shifted = Mat4::Identity();
  shifted(0, 3) = 40.0;  // pushes projections far off-screen

  std::vector<CameraFrame> frames;
  frames.push_back(make_test_frame("b_far", far_pose, 200, 200, 3.0f));
  frames.push_back(make_test_frame("a_near", Mat4::Identity(), 200, 200, 2.0f));
  frames.push_back(make_test_frame("c_off", shifted, 200, 200, 2.0f));

  const KeyframeAssignment kf = select_keyframe(5, box, frames, 0.15, 0.05);
  CHECK(kf.object_id == 5);
  CHECK(kf.frame_id == "a_near");  // ties on count=9 broken by distance
  CHECK(kf.visible_count == 9);
  CHECK(kf.crop_rect.u_min >= 0);
  CHECK(kf.crop_rect.u_max < 200);

  // permuting the frame list does not change the winner
  std::vector<CameraFrame> shuffled{frames[2], frames[0], frames[1]};
  CHECK(select_keyframe(5, box, shuffled, 0.15, 0.05).frame_id == "a_near");

  std::vector<CameraFrame> none{make_test_frame("empty", shifted, 200, 200, 2.0f)};
  CHECK_THROWS_AS(select_keyframe(5, box, none, 0.15, 0.05), NoVisibleFrame);
}

TEST_CASE("visual table layout") {
  auto crop = [](int w, int h, cv::Scalar col) { return cv::Mat(h, w, CV_8UC3, col); };

  const cv::Mat one = build_visual_table({{3, crop(64, 48, {10, 20, 30})}});
  CHECK(one.cols == 224);
  CHECK(one.rows == 224);

  std::vector<std::pair<int, cv::Mat>> five;
  for (int i = 0; i < 5; ++i) five.emplace_back(i, crop(32, 32, {50, 60, 70}));
  const cv::Mat grid = build_visual_table(five);
  CHECK(grid.cols == 3 * 224);  // ceil(sqrt(5)) = 3 columns
  CHECK(grid.rows == 2 * 224);

  CHECK_THROWS_AS(build_visual_table({}), EmptyCrops);
}

TEST_CASE("visual table draws ids in ascending order") {
  // give each crop a saturated unique color and check cell contents
  std::vector<std::pair<int, cv::Mat>> crops;
  crops.emplace_back(7, cv::Mat(40, 40, CV_8UC3, cv::Scalar(0, 255, 0)));
  crops.emplace_back(2, cv::Mat(40, 40, CV_8UC3, cv::Scalar(255, 0, 0)));
  crops.emplace_back(9, cv::Mat(40, 40, CV_8UC3, cv::Scalar(0, 0, 255)));
  const cv::Mat grid = build_visual_table(crops);
  // cell 0 should hold id 2's blue-channel crop, cell 1 id 7's green
  CHECK(grid.at<cv::Vec3b>(112, 112) == cv::Vec3b(255, 0, 0));
  CHECK(grid.at<cv::Vec3b>(112, 224 + 112) == cv::Vec3b(0, 255, 0));
  CHECK(grid.at<cv::Vec3b>(224 + 112, 112) == cv::Vec3b(0, 0, 255));
}
