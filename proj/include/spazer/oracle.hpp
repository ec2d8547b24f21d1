#pragma once

#include "spazer/pipeline.hpp"
#include "spazer/scene.hpp"
#include "spazer/vlm.hpp"

#include <mutex>
#include <string>
#include <vector>

namespace spazer {

/// Offline VLM stand-in that answers every pipeline stage correctly from
/// synthetic ground truth, recognizing the stage by its prompt header.
/// Rules: target class = ground-truth class; view = index maximizing the
/// target's projected on-screen area; screening = ground truth first, then
/// same-class ids by center distance; visual filter = ids of the target
/// class; final decision = ground-truth id.
class OracleBackend : public VlmBackend {
 public:
  OracleBackend(const Scene& scene, std::vector<GroundingQuery> queries,
                PipelineConfig config);

  Completion complete(const VlmRequest& request) override;
  std::string name() const override { return "oracle"; }

 private:
  const GroundingQuery& match_query(const std::string& prompt) const;
  int best_view_index(const Aabb3& box) const;

  std::vector<DetectedObject> detections_;
  SceneBounds bounds_;
  std::vector<GroundingQuery> queries_;
  PipelineConfig config_;
  mutable std::mutex mu_;
};

}  // namespace spazer
