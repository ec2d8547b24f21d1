#include "spazer/pipeline.hpp"

#include "spazer/errors.hpp"

#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

using nlohmann::json;
namespace fs = std::filesystem;

namespace spazer {
namespace {

std::string lower_trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string id_list_string(const std::vector<int>& ids) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ", ";
    os << ids[i];
  }
  os << "]";
  return os.str();
}

// Accepts 3, "3" or 3.0-style ids coming back from a model.
std::optional<int> coerce_id(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<int>(d)) return static_cast<int>(d);
    return std::nullopt;
  }
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const int i = std::stoi(v.get<std::string>(), &used);
      if (used == v.get<std::string>().size()) return i;
    } catch (...) {}
  }
  return std::nullopt;
}

std::vector<int> coerce_id_list(const json& v) {
  std::vector<int> out;
  if (v.is_array()) {
    for (const json& e : v)
      if (auto id = coerce_id(e)) out.push_back(*id);
  } else if (auto id = coerce_id(v)) {
    out.push_back(*id);
  }
  return out;
}

json box_json(const Aabb3& b) {
  return {{"center", {b.center.x(), b.center.y(), b.center.z()}},
          {"size", {b.size.x(), b.size.y(), b.size.z()}}};
}

}  // namespace

double similarity(const std::string& a_raw, const std::string& b_raw) {
  const std::string a = lower_trim(a_raw);
  const std::string b = lower_trim(b_raw);
  if (a.empty() || b.empty()) return 0.0;
  if (a == b) return 1.0;

  double best = 0.0;
  const std::string& longer = a.size() >= b.size() ? a : b;
  const std::string& shorter = a.size() >= b.size() ? b : a;
  if (longer.find(shorter) != std::string::npos)
    best = 0.8 + 0.2 * static_cast<double>(shorter.size()) / longer.size();

  const double lev = 1.0 - static_cast<double>(levenshtein(a, b)) /
                               static_cast<double>(std::max(a.size(), b.size()));
  return std::max(best, lev);
}

GroundingAgent::GroundingAgent(const Scene& scene, const PipelineConfig& config,
                               VlmBackend& backend, const PromptLibrary& prompts)
    : scene_(scene), config_(config), backend_(backend), prompts_(prompts) {
  if (config.n_views < 1) throw Error("n_views must be >= 1");
  if (config.top_k < 1 || config.top_k > 10) throw Error("top_k must be in [1, 10]");
  if (config.tau < 0.0 || config.tau > 1.0) throw Error("tau must be in [0, 1]");
  if (config.fov_deg <= 0.0 || config.fov_deg >= 180.0)
    throw Error("fov_deg must be in (0, 180)");
  if (config.image_size < 16) throw Error("image_size too small");
}

void GroundingAgent::set_views(std::shared_ptr<const std::vector<RenderedView>> views) {
  views_ = std::move(views);
}

const std::vector<RenderedView>& GroundingAgent::views() {
  if (!views_)
    views_ = std::make_shared<const std::vector<RenderedView>>(render_holistic_views(
        scene_.cloud, scene_.bounds, config_.n_views, config_.fov_deg,
        config_.image_size, config_.point_size_m));
  return *views_;
}

VlmRequest GroundingAgent::make_request() const {
  VlmRequest req;
  req.temperature = config_.temperature;
  req.max_attempts = config_.max_attempts;
  return req;
}

std::optional<json> GroundingAgent::ask_json(const std::string& stage,
                                             const VlmRequest& req,
                                             GroundingTrace& trace) {
  const Completion c = backend_.complete(req);
  trace.responses.push_back({stage, c.text, c.attempts});
  try {
    return parse_json_payload(c.text);
  } catch (const NoJsonFound&) {
  } catch (const UnbalancedBraces&) {
  }
  return std::nullopt;
}

std::string GroundingAgent::predict_target_class(const std::string& query_text,
                                                 GroundingTrace& trace) {
  VlmRequest req = make_request();
  req.add_text(render_template(prompts_.target_class, {{"text", query_text}}));

  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto j = ask_json("target_class", req, trace);
    if (j && j->contains("target_class") && (*j)["target_class"].is_string()) {
      const std::string cls = lower_trim((*j)["target_class"].get<std::string>());
      if (!cls.empty()) return cls;
    }
  }
  trace.fallbacks_taken.push_back("target_class");
  return "unknown";
}

int GroundingAgent::select_view(const std::vector<RenderedView>& views,
                                const std::string& target_class,
                                const std::string& query_text, GroundingTrace& trace) {
  VlmRequest req = make_request();
  req.add_text(render_template(prompts_.view_selection,
                               {{"target_class", target_class}, {"text", query_text}}));
  for (const RenderedView& v : views) req.add_image(v.image);

  const int max_index = static_cast<int>(views.size()) - 1;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto j = ask_json("view_selection", req, trace);
    if (j && j->contains("view")) {
      if (const auto idx = coerce_id((*j)["view"]); idx && *idx >= 0 && *idx <= max_index)
        return *idx;
    }
  }
  trace.fallbacks_taken.push_back("view_selection");
  return 0;  // BEV
}

std::vector<std::pair<int, cv::Mat>> GroundingAgent::collect_crops(
    const std::vector<int>& ids) {
  std::vector<std::pair<int, cv::Mat>> crops;
  for (int id : ids) {
    const DetectedObject* obj = scene_.find_object(id);
    if (!obj) continue;
    KeyframeAssignment kf;
    try {
      kf = select_keyframe(id, obj->bbox, scene_.frames, config_.depth_tol_m,
                           config_.rel_depth_tol);
    } catch (const NoVisibleFrame&) {
      continue;
    }
    const CameraFrame* frame = nullptr;
    for (const CameraFrame& f : scene_.frames)
      if (f.frame_id == kf.frame_id) frame = &f;
    if (!frame || frame->rgb_path.empty()) continue;
    const cv::Mat rgb = cv::imread(frame->rgb_path, cv::IMREAD_COLOR);
    if (rgb.empty()) continue;
    const cv::Rect rect(kf.crop_rect.u_min, kf.crop_rect.v_min,
                        kf.crop_rect.u_max - kf.crop_rect.u_min + 1,
                        kf.crop_rect.v_max - kf.crop_rect.v_min + 1);
    crops.emplace_back(id, rgb(rect & cv::Rect(0, 0, rgb.cols, rgb.rows)).clone());
  }
  return crops;
}

std::vector<int> GroundingAgent::filter_anchors(const std::string& target_class,
                                                GroundingTrace& trace) {
  if (scene_.detections.empty()) throw EmptyDetections("scene has no detections");

  std::vector<int> all_ids;
  for (const DetectedObject& d : scene_.detections) all_ids.push_back(d.id);
  std::sort(all_ids.begin(), all_ids.end());

  double best_score = -1.0;
  const DetectedObject* best = nullptr;
  if (target_class != "unknown") {
    for (const DetectedObject& d : scene_.detections) {
      const double s = similarity(target_class, d.class_label);
      if (s > best_score) {
        best_score = s;
        best = &d;
      }
    }
  }

  if (best && best_score >= config_.tau) {
    trace.used_visual_fallback = false;
    trace.matched_class = best->class_label;
    std::vector<int> filtered;
    for (const DetectedObject& d : scene_.detections)
      if (d.class_label == best->class_label) filtered.push_back(d.id);
    std::sort(filtered.begin(), filtered.end());
    return filtered;
  }

  // low-confidence text match: re-evaluate from the visual object table
  trace.used_visual_fallback = true;
  trace.matched_class = std::nullopt;

  const auto crops = collect_crops(all_ids);
  if (!crops.empty()) {
    VlmRequest req = make_request();
    req.add_text(render_template(prompts_.visual_fallback,
                                 {{"target_class", target_class},
                                  {"object_id_list", id_list_string(all_ids)}}));
    req.add_image(build_visual_table(crops));

    const std::set<int> valid(all_ids.begin(), all_ids.end());
    for (int attempt = 0; attempt < 2; ++attempt) {
      const auto j = ask_json("anchor_filter", req, trace);
      if (!j || !j->contains("object_id")) continue;
      std::vector<int> picked;
      for (int id : coerce_id_list((*j)["object_id"]))
        if (valid.count(id) && std::find(picked.begin(), picked.end(), id) == picked.end())
          picked.push_back(id);
      if (!picked.empty()) {
        std::sort(picked.begin(), picked.end());
        return picked;
      }
    }
  }
  trace.fallbacks_taken.push_back("filter_all");
  return all_ids;
}

std::vector<int> GroundingAgent::screen_candidates(const RenderedView& annotated_view,
                                                   const std::vector<int>& valid_ids,
                                                   const std::string& target_class,
                                                   const std::string& query_text,
                                                   GroundingTrace& trace) {
  const int k = config_.top_k;
  if (static_cast<int>(valid_ids.size()) <= k) {
    std::vector<int> all(valid_ids);
    std::sort(all.begin(), all.end());
    return all;  // few enough candidates: no VLM call
  }

  VlmRequest req = make_request();
  req.add_text(render_template(prompts_.candidate_screening,
                               {{"target_class", target_class},
                                {"text", query_text},
                                {"n_topk", std::to_string(k)},
                                {"object_id_list", id_list_string(valid_ids)}}));
  req.add_image(annotated_view.image);

  const std::set<int> valid(valid_ids.begin(), valid_ids.end());
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto j = ask_json("candidate_screening", req, trace);
    if (!j || !j->contains("object_id")) continue;
    std::vector<int> picked;
    for (int id : coerce_id_list((*j)["object_id"]))
      if (valid.count(id) && std::find(picked.begin(), picked.end(), id) == picked.end())
        picked.push_back(id);
    if (!picked.empty()) {
      if (static_cast<int>(picked.size()) > k) picked.resize(static_cast<std::size_t>(k));
      return picked;
    }
  }

  // deterministic default: centermost candidates first
  trace.fallbacks_taken.push_back("candidate_screening");
  const Vec3 center = scene_.bounds.center();
  std::vector<int> ranked(valid_ids);
  std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    const DetectedObject* da = scene_.find_object(a);
    const DetectedObject* db = scene_.find_object(b);
    const double dista = da ? (da->bbox.center - center).norm() : 1e300;
    const double distb = db ? (db->bbox.center - center).norm() : 1e300;
    if (dista != distb) return dista < distb;
    return a < b;
  });
  if (static_cast<int>(ranked.size()) > k) ranked.resize(static_cast<std::size_t>(k));
  return ranked;
}

int GroundingAgent::joint_decision(const cv::Mat& global_image,
                                   const std::vector<cv::Mat>& keyframe_images,
                                   const std::vector<int>& topk_ids,
                                   const std::string& target_class,
                                   const std::string& query_text, GroundingTrace& trace) {
  VlmRequest req = make_request();
  req.add_text(render_template(prompts_.joint_decision,
                               {{"target_class", target_class},
                                {"text", query_text},
                                {"object_id_list", id_list_string(topk_ids)}}));
  req.add_image(global_image);
  for (const cv::Mat& img : keyframe_images) req.add_image(img);

  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto j = ask_json("joint_decision", req, trace);
    if (j && j->contains("object_id")) {
      if (const auto id = coerce_id((*j)["object_id"]);
          id && std::find(topk_ids.begin(), topk_ids.end(), *id) != topk_ids.end())
        return *id;
    }
  }
  trace.fallbacks_taken.push_back("joint_decision");
  return topk_ids.front();
}

std::pair<GroundingResult, GroundingTrace> GroundingAgent::ground(
    const GroundingQuery& query) {
  if (scene_.detections.empty()) throw EmptyDetections("scene has no detections");
  if (query.text.empty()) throw Error("query text is empty");

  GroundingTrace trace;
  trace.query = query.text;

  trace.predicted_class = predict_target_class(query.text, trace);

  const std::vector<RenderedView>& all_views = views();
  trace.selected_view = select_view(all_views, trace.predicted_class, query.text, trace);
  const RenderedView& sel = all_views[static_cast<std::size_t>(trace.selected_view)];

  trace.filtered_ids = filter_anchors(trace.predicted_class, trace);

  // anchor ids drawn at projected box centers on the selected view
  std::vector<Mark> marks;
  for (int id : trace.filtered_ids) {
    const DetectedObject* obj = scene_.find_object(id);
    if (!obj) continue;
    if (const auto px = world_to_image(sel.camera, obj->bbox.center))
      marks.emplace_back(id, cv::Point2d(px->u, px->v));
  }
  RenderedView annotated = sel;
  annotated.annotations = marks;
  annotated.image = annotate(sel.image, marks, sel.view_index);
  if (collect_artifacts_) artifacts_ = GroundingArtifacts{annotated.image, {}, {}};

  trace.topk_ids = screen_candidates(annotated, trace.filtered_ids,
                                     trace.predicted_class, query.text, trace);

  // one keyframe per candidate; candidates no frame sees keep their rank
  std::vector<cv::Mat> keyframe_images;
  std::vector<Mark> topk_marks;
  for (int id : trace.topk_ids) {
    const DetectedObject* obj = scene_.find_object(id);
    if (!obj) continue;
    if (const auto px = world_to_image(sel.camera, obj->bbox.center))
      topk_marks.emplace_back(id, cv::Point2d(px->u, px->v));

    KeyframeAssignment kf;
    try {
      kf = select_keyframe(id, obj->bbox, scene_.frames, config_.depth_tol_m,
                           config_.rel_depth_tol);
    } catch (const NoVisibleFrame&) {
      continue;
    }
    trace.keyframes.push_back(kf);
    const CameraFrame* frame = nullptr;
    for (const CameraFrame& f : scene_.frames)
      if (f.frame_id == kf.frame_id) frame = &f;
    if (!frame || frame->rgb_path.empty()) continue;
    cv::Mat rgb = cv::imread(frame->rgb_path, cv::IMREAD_COLOR);
    if (rgb.empty()) continue;
    const ProjectedPoint pp =
        project_point(frame->intrinsics, frame->world_to_camera, obj->bbox.center);
    std::vector<Mark> frame_marks;
    if (pp.in_front) frame_marks.emplace_back(id, cv::Point2d(pp.u, pp.v));
    keyframe_images.push_back(annotate(rgb, frame_marks, 0));
    if (collect_artifacts_) artifacts_.keyframes.emplace_back(id, keyframe_images.back());
  }

  const cv::Mat global = annotate(sel.image, topk_marks, sel.view_index);
  if (collect_artifacts_) artifacts_.joint_global_view = global;
  trace.final_id = joint_decision(global, keyframe_images, trace.topk_ids,
                                  trace.predicted_class, query.text, trace);

  const DetectedObject* final_obj = scene_.find_object(trace.final_id);
  trace.final_box = final_obj ? final_obj->bbox : Aabb3{};

  return {{trace.final_id, trace.final_box}, trace};
}

std::pair<GroundingResult, GroundingTrace> ground(const Scene& scene,
                                                  const GroundingQuery& query,
                                                  const PipelineConfig& config,
                                                  VlmBackend& backend) {
  GroundingAgent agent(scene, config, backend);
  return agent.ground(query);
}

json trace_to_json(const GroundingTrace& trace, const PipelineConfig& config) {
  json j;
  j["query"] = trace.query;
  j["predicted_class"] = trace.predicted_class;
  j["matched_class"] = trace.matched_class ? json(*trace.matched_class) : json(nullptr);
  j["used_visual_fallback"] = trace.used_visual_fallback;
  j["selected_view"] = trace.selected_view;
  j["filtered_ids"] = trace.filtered_ids;
  j["topk_ids"] = trace.topk_ids;
  j["keyframes"] = json::array();
  for (const KeyframeAssignment& kf : trace.keyframes)
    j["keyframes"].push_back({{"object_id", kf.object_id},
                              {"frame_id", kf.frame_id},
                              {"visible_count", kf.visible_count},
                              {"crop_rect",
                               {kf.crop_rect.u_min, kf.crop_rect.v_min,
                                kf.crop_rect.u_max, kf.crop_rect.v_max}}});
  j["final_id"] = trace.final_id;
  j["final_box"] = box_json(trace.final_box);
  j["responses"] = json::array();
  for (const StageResponse& r : trace.responses)
    j["responses"].push_back(
        {{"stage", r.stage}, {"raw", r.raw}, {"attempts", r.attempts}});
  j["fallbacks_taken"] = trace.fallbacks_taken;
  j["config"] = {{"n_views", config.n_views},
                 {"top_k", config.top_k},
                 {"tau", config.tau},
                 {"fov_deg", config.fov_deg},
                 {"depth_tol_m", config.depth_tol_m},
                 {"rel_depth_tol", config.rel_depth_tol},
                 {"image_size", config.image_size},
                 {"point_size_m", config.point_size_m},
                 {"temperature", config.temperature},
                 {"max_attempts", config.max_attempts}};
  return j;
}

AccuracyReport run_evaluate(const Scene& scene, const std::vector<GroundingQuery>& queries,
                            const PipelineConfig& config, VlmBackend& backend,
                            const EvaluateOptions& options, const PromptLibrary& prompts) {
  if (queries.empty()) throw EmptyRecords("no queries to evaluate");
  fs::create_directories(options.out_dir);

  auto views = std::make_shared<const std::vector<RenderedView>>(render_holistic_views(
      scene.cloud, scene.bounds, config.n_views, config.fov_deg, config.image_size,
      config.point_size_m));

  std::vector<EvalRecord> records(queries.size());
  std::vector<json> traces(queries.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    GroundingAgent agent(scene, config, backend, prompts);
    agent.set_views(views);
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= queries.size()) break;
      const GroundingQuery& q = queries[i];
      EvalRecord rec;
      rec.query_idx = static_cast<int>(i);
      rec.splits = q.splits;
      try {
        auto [result, trace] = agent.ground(q);
        if (q.gt_box) rec.iou = iou_aabb(result.box, *q.gt_box);
        if (q.gt_id) rec.correct_selection = (result.final_id == *q.gt_id);
        traces[i] = trace_to_json(trace, config);
        traces[i]["query_idx"] = static_cast<int>(i);
      } catch (const std::exception& e) {
        if (q.gt_box) rec.iou = 0.0;
        if (q.gt_id) rec.correct_selection = false;
        traces[i] = {{"query_idx", static_cast<int>(i)}, {"query", q.text},
                     {"error", e.what()}};
      }
      records[i] = std::move(rec);
    }
  };

  const int n_workers = std::max(1, std::min<int>(options.parallel,
                                                  static_cast<int>(queries.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (std::size_t i = 0; i < traces.size(); ++i) {
    std::ofstream out(fs::path(options.out_dir) / (std::to_string(i) + "_trace.json"));
    out << traces[i].dump(2) << "\n";
  }

  const AccuracyReport report = accuracy_report(records, options.thresholds);
  {
    std::ofstream out(fs::path(options.out_dir) / "report.json");
    out << report.to_json().dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(options.out_dir) / "report.txt");
    out << report.to_text();
  }
  return report;
}

std::vector<GroundingQuery> load_queries_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open queries file: " + path);
  std::vector<GroundingQuery> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError(std::string("bad query line: ") + e.what());
    }
    GroundingQuery q;
    if (!j.contains("text") || !j["text"].is_string() ||
        j["text"].get<std::string>().empty())
      throw SchemaError("query line lacks a non-empty 'text'");
    q.text = j["text"].get<std::string>();
    if (j.contains("gt_id")) q.gt_id = j["gt_id"].get<int>();
    if (j.contains("gt_box")) {
      const json& b = j["gt_box"];
      Aabb3 box;
      box.center = Vec3(b.at("center")[0], b.at("center")[1], b.at("center")[2]);
      box.size = Vec3(b.at("size")[0], b.at("size")[1], b.at("size")[2]);
      q.gt_box = box;
    }
    if (j.contains("splits"))
      for (const json& s : j["splits"]) q.splits.push_back(s.get<std::string>());
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace spazer
