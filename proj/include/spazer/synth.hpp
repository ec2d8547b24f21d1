#pragma once

#include "spazer/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spazer::synth {

struct SynthObject {
  std::string class_label;
  Vec3 center;
  Vec3 size;
  Color3 color;
  std::string color_name;
};

struct SynthCamera {
  Vec3 position;
  Vec3 look_at;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  Vec3 room_size = Vec3(5.0, 4.0, 2.6);  // room spans [0, room_size]
  double point_spacing_m = 0.01;
  CameraIntrinsics intrinsics{300.0, 300.0, 240.0, 180.0, 480, 360};
  double depth_shift = 1000.0;
  double vis_tol_abs = 0.10;   // tolerances baked into the visibility ground truth
  double vis_rel_tol = 0.05;
  std::vector<SynthObject> objects;
  std::vector<SynthCamera> cameras;
};

/// Seeded room with 9 objects (one tall cabinet deliberately occluding a
/// small box from the first camera) and 4 inward-looking cameras.
SynthSpec make_default_spec(std::uint64_t seed);

/// Writes a complete scene directory: scene.ply (room shell + object
/// surfaces sampled on a grid), layout.json, intrinsics/pose/depth/color
/// frames whose depth maps are ray-cast against the same box set,
/// queries.jsonl, and gt/visibility.json with analytic per-key-point
/// visibility. Same spec, same bytes. Throws OverlappingObjects.
void generate(const SynthSpec& spec, const std::string& out_dir);

}  // namespace spazer::synth
