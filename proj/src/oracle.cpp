#include "spazer/oracle.hpp"

#include "spazer/errors.hpp"
#include "spazer/render.hpp"

#include <algorithm>
#include <cmath>

using nlohmann::json;

namespace spazer {

OracleBackend::OracleBackend(const Scene& scene, std::vector<GroundingQuery> queries,
                             PipelineConfig config)
    : detections_(scene.detections),
      bounds_(scene.bounds),
      queries_(std::move(queries)),
      config_(config) {
  // longest query first so substring matching picks the full text
  std::sort(queries_.begin(), queries_.end(),
            [](const GroundingQuery& a, const GroundingQuery& b) {
              return a.text.size() > b.text.size();
            });
}

const GroundingQuery& OracleBackend::match_query(const std::string& prompt) const {
  for (const GroundingQuery& q : queries_) {
    if (q.gt_id && prompt.find("\"" + q.text + "\"") != std::string::npos) return q;
  }
  throw Error("oracle could not match any known query in the prompt");
}

int OracleBackend::best_view_index(const Aabb3& box) const {
  std::vector<RenderCamera> cams;
  cams.push_back(bev_camera(bounds_, config_.fov_deg, config_.image_size,
                            config_.image_size));
  for (const RenderCamera& c : ring_cameras(config_.n_views, bounds_, config_.fov_deg,
                                            config_.image_size, config_.image_size))
    cams.push_back(c);

  int best = 0;
  double best_area = -1.0;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
    int in_front = 0;
    for (const Vec3& p : key_points(box)) {
      const auto px = world_to_image(cams[i], p);
      if (!px) continue;
      ++in_front;
      umin = std::min(umin, std::clamp(px->u, 0.0, double(config_.image_size)));
      umax = std::max(umax, std::clamp(px->u, 0.0, double(config_.image_size)));
      vmin = std::min(vmin, std::clamp(px->v, 0.0, double(config_.image_size)));
      vmax = std::max(vmax, std::clamp(px->v, 0.0, double(config_.image_size)));
    }
    const double area =
        in_front >= 2 ? std::max(0.0, umax - umin) * std::max(0.0, vmax - vmin) : 0.0;
    if (area > best_area) {
      best_area = area;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Completion OracleBackend::complete(const VlmRequest& request) {
  std::lock_guard lock(mu_);
  const std::string prompt = request.joined_text();

  auto find_det = [&](int id) -> const DetectedObject* {
    for (const DetectedObject& d : detections_)
      if (d.id == id) return &d;
    return nullptr;
  };

  // stage recognition by template header
  if (prompt.find("parse this query and return the category") != std::string::npos) {
    const GroundingQuery& q = match_query(prompt);
    const DetectedObject* det = find_det(*q.gt_id);
    json j;
    j["target_class"] = det ? det->class_label : "unknown";
    return {j.dump(), 1};
  }

  if (prompt.find("select the view that you can see the target object most clearly") !=
      std::string::npos) {
    const GroundingQuery& q = match_query(prompt);
    const DetectedObject* det = find_det(*q.gt_id);
    json j;
    j["view"] = std::to_string(det ? best_view_index(det->bbox) : 0);
    return {j.dump(), 1};
  }

  if (prompt.find("visual object table") != std::string::npos) {
    // ids whose class equals the requested target class
    std::string cls;
    const std::string marker = "belongs to the ";
    const std::size_t at = prompt.find(marker);
    if (at != std::string::npos) {
      const std::size_t end = prompt.find(" class", at + marker.size());
      if (end != std::string::npos) cls = prompt.substr(at + marker.size(), end - at - marker.size());
    }
    std::vector<int> ids;
    for (const DetectedObject& d : detections_)
      if (cls.empty() || d.class_label == cls) ids.push_back(d.id);
    json j;
    j["object_id"] = ids;
    return {j.dump(), 1};
  }

  if (prompt.find("Here is the annotated image of the selected view.") != std::string::npos) {
    const GroundingQuery& q = match_query(prompt);
    const DetectedObject* target = find_det(*q.gt_id);
    std::vector<int> ranked;
    if (target) {
      ranked.push_back(target->id);
      std::vector<const DetectedObject*> same;
      for (const DetectedObject& d : detections_)
        if (d.id != target->id && d.class_label == target->class_label) same.push_back(&d);
      std::sort(same.begin(), same.end(), [&](const DetectedObject* a, const DetectedObject* b) {
        const double da = (a->bbox.center - target->bbox.center).norm();
        const double db = (b->bbox.center - target->bbox.center).norm();
        if (da != db) return da < db;
        return a->id < b->id;
      });
      for (const DetectedObject* d : same) ranked.push_back(d->id);
      if (static_cast<int>(ranked.size()) > config_.top_k)
        ranked.resize(static_cast<std::size_t>(config_.top_k));
    }
    json j;
    j["object_id"] = ranked;
    return {j.dump(), 1};
  }

  if (prompt.find("You are provided with a set of images depicting an indoor scene") !=
      std::string::npos) {
    const GroundingQuery& q = match_query(prompt);
    json j;
    j["object_id"] = *q.gt_id;
    return {j.dump(), 1};
  }

  throw Error("oracle does not recognize this prompt");
}

}  // namespace spazer
