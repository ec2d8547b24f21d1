#include "spazer/errors.hpp"
#include "spazer/ply.hpp"
#include "spazer/scene.hpp"

#include <doctest.h>

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <fstream>
#include <random>

using namespace spazer;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spazer_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("ascii ply with colors loads byte-exact") {
  const fs::path dir = temp_dir("ply_ascii");
  write_file(dir / "cloud.ply",
             "ply\n"
             "format ascii 1.0\n"
             "comment hand written\n"
             "element vertex 3\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property uchar red\nproperty uchar green\nproperty uchar blue\n"
             "end_header\n"
             "0 0 0 255 0 0\n"
             "1.5 2.5 3.5 0 255 0\n"
             "-1 -2 -3 0 0 255\n");
  const PointCloud cloud = load_point_cloud((dir / "cloud.ply").string());
  REQUIRE(cloud.size() == 3);
  CHECK(cloud.points[1].position == Eigen::Vector3f(1.5f, 2.5f, 3.5f));
  CHECK(cloud.points[0].color == Color3{255, 0, 0});
  CHECK(cloud.points[2].position == Eigen::Vector3f(-1.f, -2.f, -3.f));
}

TEST_CASE("ply without color defaults to mid-gray") {
  const fs::path dir = temp_dir("ply_nocolor");
  write_file(dir / "cloud.ply",
             "ply\nformat ascii 1.0\nelement vertex 2\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n0 0 0\n1 1 1\n");
  const PointCloud cloud = load_point_cloud((dir / "cloud.ply").string());
  for (const auto& p : cloud.points) CHECK(p.color == Color3{128, 128, 128});
}

TEST_CASE("ply error paths") {
  const fs::path dir = temp_dir("ply_err");
  write_file(dir / "nomagic.ply", "nope\nformat ascii 1.0\nend_header\n");
  CHECK_THROWS_AS(load_point_cloud((dir / "nomagic.ply").string()), MalformedHeader);

  write_file(dir / "noxyz.ply",
             "ply\nformat ascii 1.0\nelement vertex 1\n"
             "property float nx\nend_header\n0\n");
  CHECK_THROWS_AS(load_point_cloud((dir / "noxyz.ply").string()), MissingProperty);

  write_file(dir / "short.ply",
             "ply\nformat ascii 1.0\nelement vertex 3\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n0 0 0\n1 1 1\n");
  CHECK_THROWS_AS(load_point_cloud((dir / "short.ply").string()), TruncatedBody);
}

TEST_CASE("ply with extra elements and properties still yields the vertices") {
  const fs::path dir = temp_dir("ply_extra");
  write_file(dir / "mesh.ply",
             "ply\nformat ascii 1.0\n"
             "element vertex 2\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property float confidence\n"
             "element face 1\n"
             "property list uchar int vertex_indices\n"
             "end_header\n"
             "0 0 0 0.9\n"
             "1 2 3 0.5\n"
             "2 0 1\n");
  const PointCloud cloud = load_point_cloud((dir / "mesh.ply").string());
  REQUIRE(cloud.size() == 2);
  CHECK(cloud.points[1].position == Eigen::Vector3f(1.f, 2.f, 3.f));
}

TEST_CASE("binary ply round-trip is lossless") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> coord(-10.f, 10.f);
  std::uniform_int_distribution<int> chan(0, 255);
  PointCloud cloud;
  for (int i = 0; i < 500; ++i) {
    PointXYZRGB p;
    p.position = Eigen::Vector3f(coord(rng), coord(rng), coord(rng));
    p.color = {static_cast<std::uint8_t>(chan(rng)), static_cast<std::uint8_t>(chan(rng)),
               static_cast<std::uint8_t>(chan(rng))};
    cloud.points.push_back(p);
  }
  const fs::path dir = temp_dir("ply_rt");
  save_point_cloud(cloud, (dir / "rt.ply").string());
  const PointCloud back = load_point_cloud((dir / "rt.ply").string());
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back.points[i].position == cloud.points[i].position);
    CHECK(back.points[i].color == cloud.points[i].color);
  }
}

TEST_CASE("layout loading") {
  const fs::path dir = temp_dir("layout");

  write_file(dir / "ok.json",
             R"({"objects":[
                  {"id":3,"class":" Chair ","center":[1,2,0.5],"size":[0.5,0.5,1]},
                  {"id":7,"class":"TABLE","center":[3,1,0.4],"size":[1,0.6,0.8]}]})");
  const auto objs = load_layout((dir / "ok.json").string());
  REQUIRE(objs.size() == 2);
  CHECK(objs[0].id == 3);
  CHECK(objs[0].class_label == "chair");  // lowercased + trimmed
  CHECK(objs[1].class_label == "table");

  write_file(dir / "dup.json",
             R"({"objects":[
                  {"id":3,"class":"a","center":[0,0,0],"size":[1,1,1]},
                  {"id":3,"class":"b","center":[5,5,5],"size":[1,1,1]}]})");
  CHECK_THROWS_AS(load_layout((dir / "dup.json").string()), DuplicateId);

  write_file(dir / "zero.json",
             R"({"objects":[{"id":0,"class":"a","center":[0,0,0],"size":[0,1,1]}]})");
  CHECK_THROWS_AS(load_layout((dir / "zero.json").string()), NonPositiveSize);

  write_file(dir / "bad.json", R"({"objects":[{"id":0,"class":"a"}]})");
  CHECK_THROWS_AS(load_layout((dir / "bad.json").string()), SchemaError);
}

namespace {

void write_minimal_frames(const fs::path& dir, const std::string& pose_text) {
  write_file(dir / "intrinsics.json",
             R"({"fx":100,"fy":100,"cx":50,"cy":50,"width":100,"height":100,"depth_shift":1000})");
  fs::create_directories(dir / "pose");
  fs::create_directories(dir / "depth");
  write_file(dir / "pose" / "000000.txt", pose_text);
  cv::Mat depth(100, 100, CV_16U, cv::Scalar(1500));
  cv::imwrite((dir / "depth" / "000000.png").string(), depth);
}

}  // namespace

TEST_CASE("camera frame ingestion: identity pose and depth scaling") {
  const fs::path dir = temp_dir("frames_ident");
  write_minimal_frames(dir, "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
  const auto frames = load_camera_frames(dir.string());
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].world_to_camera.isApprox(Mat4::Identity(), 1e-12));
  CHECK(frames[0].depth.at<float>(10, 10) == doctest::Approx(1.5));  // 1500 mm
}

TEST_CASE("camera frame ingestion: pure translation is inverted") {
  const fs::path dir = temp_dir("frames_trans");
  write_minimal_frames(dir, "1 0 0 0\n0 1 0 0\n0 0 1 2\n0 0 0 1\n");
  const auto frames = load_camera_frames(dir.string());
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].world_to_camera(2, 3) == doctest::Approx(-2.0));
  // composing stored c2w with loaded w2c gives identity
  Mat4 c2w = Mat4::Identity();
  c2w(2, 3) = 2.0;
  CHECK((c2w * frames[0].world_to_camera).isApprox(Mat4::Identity(), 1e-6));
}

TEST_CASE("camera frame ingestion: non-rotation pose rejected") {
  const fs::path dir = temp_dir("frames_bad");
  write_minimal_frames(dir, "2 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
  CHECK_THROWS_AS(load_camera_frames(dir.string()), NonInvertiblePose);
}

TEST_CASE("camera frame ingestion: missing intrinsics") {
  const fs::path dir = temp_dir("frames_noint");
  fs::create_directories(dir / "pose");
  CHECK_THROWS_AS(load_camera_frames(dir.string()), MissingIntrinsics);
}

TEST_CASE("depth rescaled to intrinsics resolution") {
  const fs::path dir = temp_dir("frames_rescale");
  write_file(dir / "intrinsics.json",
             R"({"fx":100,"fy":100,"cx":50,"cy":40,"width":100,"height":80,"depth_shift":1000})");
  fs::create_directories(dir / "pose");
  fs::create_directories(dir / "depth");
  write_file(dir / "pose" / "f.txt", "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
  cv::Mat depth(40, 50, CV_16U, cv::Scalar(800));  // half resolution
  cv::imwrite((dir / "depth" / "f.png").string(), depth);
  const auto frames = load_camera_frames(dir.string());
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].depth.cols == 100);
  CHECK(frames[0].depth.rows == 80);
  CHECK(frames[0].depth.at<float>(20, 20) == doctest::Approx(0.8));
}

TEST_CASE("compute_bounds basics") {
  PointCloud cloud;
  cloud.points.push_back({{0, 0, 0}, {}});
  cloud.points.push_back({{4, 4, 2}, {}});
  const SceneBounds b = compute_bounds(cloud);
  CHECK(b.min == Vec3(0, 0, 0));
  CHECK(b.max == Vec3(4, 4, 2));
  CHECK(b.extents().x() == 4);
  CHECK(b.extents().y() == 4);

  PointCloud single;
  single.points.push_back({{1.f, -2.f, 3.f}, {}});
  const SceneBounds s = compute_bounds(single);
  CHECK(s.min == s.max);

  CHECK_THROWS_AS(compute_bounds(PointCloud{}), EmptyCloud);
}

TEST_CASE("compute_bounds contains every point (property)") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> coord(-1.f, 1.f);
  PointCloud cloud;
  for (int i = 0; i < 10000; ++i)
    cloud.points.push_back({{coord(rng), coord(rng), coord(rng)}, {}});
  const SceneBounds b = compute_bounds(cloud);
  for (const auto& p : cloud.points) {
    const Vec3 q = p.position.cast<double>();
    CHECK(((q - b.min).minCoeff() >= 0.0));
    CHECK(((b.max - q).minCoeff() >= 0.0));
  }
}

TEST_CASE("key_points order and symmetry") {
  Aabb3 box{Vec3(0, 0, 0), Vec3(2, 2, 2)};
  const auto pts = key_points(box);
  CHECK(pts[0] == Vec3(-1, -1, -1));
  CHECK(pts[1] == Vec3(-1, -1, 1));
  CHECK(pts[2] == Vec3(-1, 1, -1));
  CHECK(pts[7] == Vec3(1, 1, 1));
  CHECK(pts[8] == Vec3(0, 0, 0));

  Aabb3 shifted{Vec3(1, 0, 0), Vec3(2, 2, 2)};
  const auto sp = key_points(shifted);
  Vec3 mean = Vec3::Zero();
  for (int i = 0; i < 8; ++i) mean += sp[static_cast<std::size_t>(i)];
  mean /= 8.0;
  CHECK((mean - shifted.center).norm() < 1e-9);
  CHECK(sp[8] == shifted.center);

  Aabb3 arb{Vec3(0.3, -1.2, 2.7), Vec3(0.5, 1.5, 0.25)};
  for (int i = 0; i < 8; ++i) {
    const Vec3 d = (key_points(arb)[static_cast<std::size_t>(i)] - arb.center).cwiseAbs();
    CHECK((d - 0.5 * arb.size).cwiseAbs().maxCoeff() < 1e-12);
  }
}
