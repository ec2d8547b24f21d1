#include "spazer/synth.hpp"

#include "spazer/errors.hpp"
#include "spazer/ply.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

using nlohmann::json;
namespace fs = std::filesystem;

namespace spazer::synth {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Primitive {
  Vec3 lo, hi;  // degenerate on one axis for wall/floor sheets
  Color3 color;
};

// Slab test; dir need not be normalized. Returns the smallest t > eps.
double ray_box(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double tmin = -kInf, tmax = kInf;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo[a] || o[a] > hi[a]) return kInf;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return kInf;
  }
  constexpr double kEps = 1e-9;
  if (tmin > kEps) return tmin;
  if (tmax > kEps) return tmax;  // origin inside (room shell seen from within)
  return kInf;
}

// Camera basis: x = right, y = down, z = forward (image v grows downward).
struct CamPose {
  Mat3 r_wc;  // world-from-camera rotation
  Vec3 pos;
};

CamPose make_pose(const SynthCamera& cam) {
  const Vec3 f = (cam.look_at - cam.position).normalized();
  const Vec3 up_hint = std::abs(f.z()) > 0.999 ? Vec3(0, 1, 0) : Vec3(0, 0, 1);
  const Vec3 r = f.cross(up_hint).normalized();
  const Vec3 dwn = f.cross(r);
  CamPose p;
  p.r_wc.col(0) = r;
  p.r_wc.col(1) = dwn;
  p.r_wc.col(2) = f;
  p.pos = cam.position;
  return p;
}

void sample_rect(PointCloud& cloud, const Vec3& origin, const Vec3& ax_u, const Vec3& ax_v,
                 double len_u, double len_v, double spacing, Color3 color) {
  const int nu = std::max(1, static_cast<int>(std::lround(len_u / spacing)));
  const int nv = std::max(1, static_cast<int>(std::lround(len_v / spacing)));
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const Vec3 p = origin + ax_u * ((i + 0.5) * len_u / nu) + ax_v * ((j + 0.5) * len_v / nv);
      cloud.points.push_back({p.cast<float>(), color});
    }
  }
}

void sample_box_faces(PointCloud& cloud, const Vec3& lo, const Vec3& hi, double spacing,
                      Color3 color) {
  const Vec3 ext = hi - lo;
  // z faces
  sample_rect(cloud, lo, Vec3(1, 0, 0), Vec3(0, 1, 0), ext.x(), ext.y(), spacing, color);
  sample_rect(cloud, Vec3(lo.x(), lo.y(), hi.z()), Vec3(1, 0, 0), Vec3(0, 1, 0), ext.x(),
              ext.y(), spacing, color);
  // y faces
  sample_rect(cloud, lo, Vec3(1, 0, 0), Vec3(0, 0, 1), ext.x(), ext.z(), spacing, color);
  sample_rect(cloud, Vec3(lo.x(), hi.y(), lo.z()), Vec3(1, 0, 0), Vec3(0, 0, 1), ext.x(),
              ext.z(), spacing, color);
  // x faces
  sample_rect(cloud, lo, Vec3(0, 1, 0), Vec3(0, 0, 1), ext.y(), ext.z(), spacing, color);
  sample_rect(cloud, Vec3(hi.x(), lo.y(), lo.z()), Vec3(0, 1, 0), Vec3(0, 0, 1), ext.y(),
              ext.z(), spacing, color);
}

std::array<Vec3, 9> box_probe_points(const Vec3& center, const Vec3& size) {
  const Vec3 h = 0.5 * size;
  std::array<Vec3, 9> pts;
  for (int i = 0; i < 8; ++i) {
    pts[i] = center + Vec3(((i & 4) ? 1 : -1) * h.x(), ((i & 2) ? 1 : -1) * h.y(),
                           ((i & 1) ? 1 : -1) * h.z());
  }
  pts[8] = center;
  return pts;
}

void validate_spec(const SynthSpec& spec) {
  for (const SynthObject& o : spec.objects) {
    const Vec3 lo = o.center - 0.5 * o.size;
    const Vec3 hi = o.center + 0.5 * o.size;
    if (lo.minCoeff() < -1e-9 || (spec.room_size - hi).minCoeff() < -1e-9)
      throw OverlappingObjects("object '" + o.class_label + "' sticks out of the room");
  }
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.objects.size(); ++j) {
      const SynthObject& a = spec.objects[i];
      const SynthObject& b = spec.objects[j];
      bool overlap = true;
      for (int ax = 0; ax < 3; ++ax) {
        const double lo = std::max(a.center[ax] - 0.5 * a.size[ax],
                                   b.center[ax] - 0.5 * b.size[ax]);
        const double hi = std::min(a.center[ax] + 0.5 * a.size[ax],
                                   b.center[ax] + 0.5 * b.size[ax]);
        if (hi - lo <= 1e-9) overlap = false;
      }
      if (overlap)
        throw OverlappingObjects("objects " + std::to_string(i) + " and " +
                                 std::to_string(j) + " overlap");
    }
  }
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SynthSpec make_default_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;

  struct Proto {
    const char* cls;
    Vec3 center;
    Vec3 size;
    Color3 color;
    const char* color_name;
    bool jitter;
  };
  // the purple cabinet sits on the line from camera 0 to the yellow box,
  // giving the ground truth a guaranteed occlusion pair
  const std::vector<Proto> protos = {
      {"chair", {1.00, 0.90, 0.45}, {0.50, 0.50, 0.90}, {200, 40, 40}, "red", true},
      {"chair", {3.50, 1.00, 0.45}, {0.50, 0.50, 0.90}, {40, 170, 60}, "green", true},
      {"chair", {3.30, 3.10, 0.45}, {0.50, 0.50, 0.90}, {50, 80, 200}, "blue", true},
      {"table", {2.50, 1.40, 0.375}, {1.20, 0.70, 0.75}, {130, 90, 50}, "brown", true},
      {"table", {1.60, 3.20, 0.375}, {1.20, 0.70, 0.75}, {235, 140, 40}, "orange", true},
      {"cabinet", {1.35, 1.55, 0.90}, {0.80, 0.40, 1.80}, {150, 60, 180}, "purple", false},
      {"box", {2.10, 2.50, 0.175}, {0.35, 0.35, 0.35}, {230, 200, 50}, "yellow", false},
      {"sofa", {4.55, 2.10, 0.40}, {0.60, 1.60, 0.80}, {60, 200, 200}, "cyan", true},
      {"lamp", {0.70, 3.10, 0.75}, {0.30, 0.30, 1.50}, {240, 240, 240}, "white", true},
  };

  std::mt19937 rng(static_cast<std::uint32_t>(seed * 2654435761u + 12345u));
  std::uniform_real_distribution<double> jit(-0.08, 0.08);

  for (const Proto& p : protos) {
    SynthObject obj{p.cls, p.center, p.size, p.color, p.color_name};
    if (p.jitter) {
      for (int tries = 0; tries < 64; ++tries) {
        SynthObject cand = obj;
        cand.center.x() += jit(rng);
        cand.center.y() += jit(rng);
        SynthSpec probe = spec;
        probe.objects.push_back(cand);
        try {
          validate_spec(probe);
          obj = cand;
          break;
        } catch (const OverlappingObjects&) {
          continue;  // re-draw the jitter
        }
      }
    }
    spec.objects.push_back(obj);
  }

  spec.cameras = {
      {{0.60, 0.60, 1.70}, {2.60, 2.20, 0.70}},
      {{4.40, 0.60, 1.70}, {2.20, 2.20, 0.70}},
      {{4.40, 3.40, 1.70}, {2.40, 1.80, 0.70}},
      {{0.60, 3.40, 1.70}, {2.60, 1.80, 0.70}},
  };
  validate_spec(spec);
  return spec;
}

void generate(const SynthSpec& spec, const std::string& out_dir) {
  validate_spec(spec);
  const fs::path root(out_dir);
  fs::create_directories(root / "pose");
  fs::create_directories(root / "depth");
  fs::create_directories(root / "color");
  fs::create_directories(root / "gt");

  const Color3 floor_color{180, 180, 180};
  const Color3 wall_color{212, 212, 212};
  const Vec3 room = spec.room_size;

  // --- point cloud: floor + 4 walls + object shells ---
  PointCloud cloud;
  sample_rect(cloud, Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), room.x(), room.y(),
              spec.point_spacing_m, floor_color);
  sample_rect(cloud, Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), room.x(), room.z(),
              spec.point_spacing_m, wall_color);
  sample_rect(cloud, Vec3(0, room.y(), 0), Vec3(1, 0, 0), Vec3(0, 0, 1), room.x(), room.z(),
              spec.point_spacing_m, wall_color);
  sample_rect(cloud, Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), room.y(), room.z(),
              spec.point_spacing_m, wall_color);
  sample_rect(cloud, Vec3(room.x(), 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), room.y(), room.z(),
              spec.point_spacing_m, wall_color);
  for (const SynthObject& o : spec.objects)
    sample_box_faces(cloud, o.center - 0.5 * o.size, o.center + 0.5 * o.size,
                     spec.point_spacing_m, o.color);
  save_point_cloud(cloud, (root / "scene.ply").string());

  // --- layout ---
  {
    json objs = json::array();
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const SynthObject& o = spec.objects[i];
      objs.push_back({{"id", static_cast<int>(i)},
                      {"class", o.class_label},
                      {"center", {o.center.x(), o.center.y(), o.center.z()}},
                      {"size", {o.size.x(), o.size.y(), o.size.z()}}});
    }
    std::ofstream out(root / "layout.json");
    out << json{{"objects", objs}}.dump(2) << "\n";
  }

  // --- intrinsics ---
  {
    const CameraIntrinsics& k = spec.intrinsics;
    std::ofstream out(root / "intrinsics.json");
    out << json{{"fx", k.fx},     {"fy", k.fy},         {"cx", k.cx},
                {"cy", k.cy},     {"width", k.width},   {"height", k.height},
                {"depth_shift", spec.depth_shift}}
               .dump(2)
        << "\n";
  }

  // --- frames: ray-cast depth + flat-color renders against the box set ---
  std::vector<Primitive> prims;
  prims.push_back({Vec3(0, 0, 0), Vec3(room.x(), room.y(), 0), floor_color});
  prims.push_back({Vec3(0, 0, 0), Vec3(room.x(), 0, room.z()), wall_color});
  prims.push_back({Vec3(0, room.y(), 0), Vec3(room.x(), room.y(), room.z()), wall_color});
  prims.push_back({Vec3(0, 0, 0), Vec3(0, room.y(), room.z()), wall_color});
  prims.push_back({Vec3(room.x(), 0, 0), Vec3(room.x(), room.y(), room.z()), wall_color});
  for (const SynthObject& o : spec.objects)
    prims.push_back({o.center - 0.5 * o.size, o.center + 0.5 * o.size, o.color});

  const CameraIntrinsics& k = spec.intrinsics;
  std::vector<cv::Mat> depth_pngs;  // CV_16U, kept for the visibility ground truth

  for (std::size_t ci = 0; ci < spec.cameras.size(); ++ci) {
    const CamPose pose = make_pose(spec.cameras[ci]);
    char name[16];
    std::snprintf(name, sizeof(name), "%06zu", ci);

    {
      std::ofstream out(root / "pose" / (std::string(name) + ".txt"));
      Mat4 c2w = Mat4::Identity();
      c2w.block<3, 3>(0, 0) = pose.r_wc;
      c2w.block<3, 1>(0, 3) = pose.pos;
      for (int r = 0; r < 4; ++r) {
        out << format_g17(c2w(r, 0)) << " " << format_g17(c2w(r, 1)) << " "
            << format_g17(c2w(r, 2)) << " " << format_g17(c2w(r, 3)) << "\n";
      }
    }

    cv::Mat depth16(k.height, k.width, CV_16U, cv::Scalar(0));
    cv::Mat color(k.height, k.width, CV_8UC3, cv::Scalar(255, 255, 255));
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        // camera-space direction with z = 1 so the hit parameter is z_c
        const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        const Vec3 dir_world = pose.r_wc * dir_cam;
        double best_t = kInf;
        const Primitive* hit = nullptr;
        for (const Primitive& p : prims) {
          const double t = ray_box(pose.pos, dir_world, p.lo, p.hi);
          if (t < best_t) {
            best_t = t;
            hit = &p;
          }
        }
        if (hit) {
          const double q = std::lround(best_t * spec.depth_shift);
          depth16.at<std::uint16_t>(v, u) =
              static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
          color.at<cv::Vec3b>(v, u) = cv::Vec3b(hit->color[2], hit->color[1], hit->color[0]);
        }
      }
    }
    cv::imwrite((root / "depth" / (std::string(name) + ".png")).string(), depth16);
    cv::imwrite((root / "color" / (std::string(name) + ".png")).string(), color);
    depth_pngs.push_back(depth16);
  }

  // --- analytic visibility ground truth (independent scalar math) ---
  {
    json objects = json::array();
    for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
      const SynthObject& o = spec.objects[oi];
      const auto probes = box_probe_points(o.center, o.size);
      json frames = json::array();
      for (std::size_t ci = 0; ci < spec.cameras.size(); ++ci) {
        const CamPose pose = make_pose(spec.cameras[ci]);
        char name[16];
        std::snprintf(name, sizeof(name), "%06zu", ci);
        int in_view = 0, n_visible = 0;
        json flags = json::array();
        for (const Vec3& p : probes) {
          const Vec3 pc = pose.r_wc.transpose() * (p - pose.pos);
          bool vis = false;
          if (pc.z() > 0.0) {
            const double u = k.fx * pc.x() / pc.z() + k.cx;
            const double v = k.fy * pc.y() / pc.z() + k.cy;
            const long ru = std::lround(u);
            const long rv = std::lround(v);
            if (ru >= 0 && rv >= 0 && ru < k.width && rv < k.height) {
              ++in_view;
              const std::uint16_t q = depth_pngs[ci].at<std::uint16_t>(
                  static_cast<int>(rv), static_cast<int>(ru));
              // mirror the loader: uint16 -> float32 meters
              const double d = static_cast<float>(q * (1.0 / spec.depth_shift));
              vis = q > 0 && std::abs(pc.z() - d) <=
                                 std::max(spec.vis_tol_abs, spec.vis_rel_tol * pc.z());
            }
          }
          n_visible += vis ? 1 : 0;
          flags.push_back(vis ? 1 : 0);
        }
        frames.push_back({{"frame_id", name},
                          {"in_view", in_view},
                          {"visible", n_visible},
                          {"points", flags}});
      }
      objects.push_back({{"object_id", static_cast<int>(oi)}, {"frames", frames}});
    }
    std::ofstream out(root / "gt" / "visibility.json");
    out << json{{"tol_abs", spec.vis_tol_abs},
                {"rel_tol", spec.vis_rel_tol},
                {"objects", objects}}
               .dump(2)
        << "\n";
  }

  // --- queries: one object each, simple relational phrasings ---
  {
    std::ofstream out(root / "queries.jsonl");
    for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
      const SynthObject& o = spec.objects[oi];
      // nearest object of a different class as the relational anchor
      std::size_t anchor = oi;
      double best = kInf;
      for (std::size_t oj = 0; oj < spec.objects.size(); ++oj) {
        if (oj == oi || spec.objects[oj].class_label == o.class_label) continue;
        const double d = (spec.objects[oj].center - o.center).norm();
        if (d < best) {
          best = d;
          anchor = oj;
        }
      }
      const SynthObject& a = spec.objects[anchor];
      int same_class = 0;
      for (const SynthObject& other : spec.objects)
        if (other.class_label == o.class_label) ++same_class;

      std::vector<std::string> texts = {
          "the " + o.color_name + " " + o.class_label + " that is closest to the " +
              a.color_name + " " + a.class_label,
          "this is a " + o.color_name + " " + o.class_label + ". it is near the " +
              a.color_name + " " + a.class_label + ".",
          "select the " + o.color_name + " " + o.class_label + " next to the " +
              a.color_name + " " + a.class_label,
      };
      json splits = json::array();
      splits.push_back(same_class > 1 ? "multiple" : "unique");
      splits.push_back(same_class > 2 ? "hard" : "easy");
      for (const std::string& text : texts) {
        json q;
        q["text"] = text;
        q["gt_id"] = static_cast<int>(oi);
        q["gt_box"] = {{"center", {o.center.x(), o.center.y(), o.center.z()}},
                       {"size", {o.size.x(), o.size.y(), o.size.z()}}};
        q["splits"] = splits;
        out << q.dump() << "\n";
      }
    }
  }
}

}  // namespace spazer::synth
