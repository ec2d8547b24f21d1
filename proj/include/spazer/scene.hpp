#pragma once

#include "spazer/types.hpp"

#include <string>
#include <vector>

namespace spazer {

/// Parses the layout JSON {"objects":[{"id","class","center","size"}]}.
/// Class labels are lowercased and trimmed. Throws DuplicateId,
/// NonPositiveSize, SchemaError.
std::vector<DetectedObject> load_layout(const std::string& path);

/// Loads intrinsics.json, pose/<id>.txt (camera-to-world, inverted here)
/// and depth/<id>.png (16-bit, divided by depth_shift) from a scene
/// directory. Depth is nearest-neighbor rescaled to the intrinsics
/// resolution when it differs. Frames are sorted by frame_id.
std::vector<CameraFrame> load_camera_frames(const std::string& dir);

SceneBounds compute_bounds(const PointCloud& cloud);

/// A fully ingested scene: cloud + detections + camera frames.
struct Scene {
  PointCloud cloud;
  std::vector<DetectedObject> detections;
  std::vector<CameraFrame> frames;
  SceneBounds bounds;
  std::string dir;

  const DetectedObject* find_object(int id) const;
};

/// Expects <dir>/scene.ply, <dir>/layout.json and the camera-frame files.
Scene load_scene(const std::string& dir);

}  // namespace spazer
