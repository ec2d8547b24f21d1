#pragma once

#include "spazer/eval.hpp"
#include "spazer/project.hpp"
#include "spazer/prompts.hpp"
#include "spazer/render.hpp"
#include "spazer/scene.hpp"
#include "spazer/vlm.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spazer {

struct PipelineConfig {
  int n_views = 4;          // ring views in addition to the BEV
  int top_k = 4;            // candidate pool size
  double tau = 0.8;         // class-similarity threshold
  double fov_deg = 60.0;
  double depth_tol_m = 0.10;
  double rel_depth_tol = 0.05;
  int image_size = 1024;    // square holistic renders
  double point_size_m = 0.02;
  double temperature = 0.2;
  int max_attempts = 3;     // transport retries per VLM call
};

struct GroundingQuery {
  std::string text;
  std::optional<int> gt_id;
  std::optional<Aabb3> gt_box;
  std::vector<std::string> splits;
};

struct StageResponse {
  std::string stage;
  std::string raw;
  int attempts = 1;
};

/// Per-stage audit record of one grounding run.
struct GroundingTrace {
  std::string query;
  std::string predicted_class;
  std::optional<std::string> matched_class;
  bool used_visual_fallback = false;
  int selected_view = 0;
  std::vector<int> filtered_ids;
  std::vector<int> topk_ids;
  std::vector<KeyframeAssignment> keyframes;
  int final_id = -1;
  Aabb3 final_box;
  std::vector<StageResponse> responses;
  std::vector<std::string> fallbacks_taken;
};

struct GroundingResult {
  int final_id = -1;
  Aabb3 box;
};

/// Images produced along the way, kept only when collection is enabled.
struct GroundingArtifacts {
  cv::Mat screening_view;     // selected view with filtered-id marks
  cv::Mat joint_global_view;  // selected view with top-k marks
  std::vector<std::pair<int, cv::Mat>> keyframes;
};

/// Class-label similarity in [0,1]: max of a substring-containment bonus
/// (>= 0.8) and normalized Levenshtein similarity, over lowercase inputs.
double similarity(const std::string& a, const std::string& b);

nlohmann::json trace_to_json(const GroundingTrace& trace, const PipelineConfig& config);

/// Runs the progressive pipeline: target-class prediction, holistic view
/// selection, anchor filtering with visual-table fallback, Top-k screening,
/// keyframe retrieval and the final 3D-2D joint decision. Every stage
/// re-asks once on a malformed reply, then falls back deterministically,
/// so a run always terminates with an answer.
class GroundingAgent {
 public:
  GroundingAgent(const Scene& scene, const PipelineConfig& config, VlmBackend& backend,
                 const PromptLibrary& prompts = PromptLibrary::builtin());

  /// Share pre-rendered holistic views across queries on the same scene.
  void set_views(std::shared_ptr<const std::vector<RenderedView>> views);

  void set_collect_artifacts(bool enable) { collect_artifacts_ = enable; }
  const GroundingArtifacts& artifacts() const { return artifacts_; }

  std::pair<GroundingResult, GroundingTrace> ground(const GroundingQuery& query);

  // Individual stages, exposed for focused testing.
  std::string predict_target_class(const std::string& query_text, GroundingTrace& trace);
  int select_view(const std::vector<RenderedView>& views, const std::string& target_class,
                  const std::string& query_text, GroundingTrace& trace);
  std::vector<int> filter_anchors(const std::string& target_class, GroundingTrace& trace);
  std::vector<int> screen_candidates(const RenderedView& annotated_view,
                                     const std::vector<int>& valid_ids,
                                     const std::string& target_class,
                                     const std::string& query_text, GroundingTrace& trace);
  int joint_decision(const cv::Mat& global_image,
                     const std::vector<cv::Mat>& keyframe_images,
                     const std::vector<int>& topk_ids, const std::string& target_class,
                     const std::string& query_text, GroundingTrace& trace);

  const std::vector<RenderedView>& views();

 private:
  std::optional<nlohmann::json> ask_json(const std::string& stage, const VlmRequest& req,
                                         GroundingTrace& trace);
  VlmRequest make_request() const;
  std::vector<std::pair<int, cv::Mat>> collect_crops(const std::vector<int>& ids);

  const Scene& scene_;
  PipelineConfig config_;
  VlmBackend& backend_;
  const PromptLibrary& prompts_;
  std::shared_ptr<const std::vector<RenderedView>> views_;
  bool collect_artifacts_ = false;
  GroundingArtifacts artifacts_;
};

/// Convenience one-shot form of the pipeline.
std::pair<GroundingResult, GroundingTrace> ground(const Scene& scene,
                                                  const GroundingQuery& query,
                                                  const PipelineConfig& config,
                                                  VlmBackend& backend);

struct EvaluateOptions {
  std::string out_dir;
  int parallel = 1;
  std::vector<double> thresholds{0.25, 0.5};
  bool save_images = false;
};

/// Grounds every query (up to `parallel` at a time), writes
/// <out>/<idx>_trace.json per query plus report.json / report.txt, and
/// returns the aggregate metrics. Per-query failures are recorded as
/// incorrect, never fatal.
AccuracyReport run_evaluate(const Scene& scene, const std::vector<GroundingQuery>& queries,
                            const PipelineConfig& config, VlmBackend& backend,
                            const EvaluateOptions& options,
                            const PromptLibrary& prompts = PromptLibrary::builtin());

/// JSON-lines queries file: {"text": "...", "gt_id": 3, "gt_box": {...}?, "splits": [...]}.
std::vector<GroundingQuery> load_queries_jsonl(const std::string& path);

}  // namespace spazer
