#include "spazer/errors.hpp"
#include "spazer/eval.hpp"
#include "spazer/oracle.hpp"
#include "spazer/pipeline.hpp"
#include "spazer/render.hpp"
#include "spazer/scene.hpp"
#include "spazer/synth.hpp"
#include "spazer/vlm.hpp"

#include <opencv2/imgcodecs.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// exit codes: 2 scene load, 3 empty detections, 4 backend config
constexpr int kExitSceneLoad = 2;
constexpr int kExitEmptyDetections = 3;
constexpr int kExitBackendConfig = 4;

struct BackendConfigError : spazer::Error {
  using Error::Error;
};

struct Options {
  std::string scene_dir;
  std::string queries_path;
  std::string out_dir = "out";
  std::string query_text;
  std::string backend = "oracle";
  std::string endpoint;
  std::string model;
  std::string script_path;
  std::string prompts_dir;
  double timeout_s = 60.0;
  int max_image_px = 0;
  spazer::PipelineConfig pipeline;
  int parallel = 1;
  std::uint64_t seed = 0;
};

void add_pipeline_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--backend", o.backend, "VLM backend")
      ->check(CLI::IsMember({"remote", "scripted", "oracle"}))
      ->capture_default_str();
  cmd->add_option("--endpoint", o.endpoint, "chat-completions endpoint (remote)");
  cmd->add_option("--model", o.model, "model name (remote)");
  cmd->add_option("--timeout-s", o.timeout_s, "remote request timeout")->capture_default_str();
  cmd->add_option("--max-image-px", o.max_image_px,
                  "downscale request images to this max side (0 = native)");
  cmd->add_option("--script", o.script_path, "scripted-backend response file");
  cmd->add_option("--prompts", o.prompts_dir, "prompt template directory override");
  cmd->add_option("--n-views", o.pipeline.n_views)->capture_default_str();
  cmd->add_option("--top-k", o.pipeline.top_k)->capture_default_str();
  cmd->add_option("--tau", o.pipeline.tau)->capture_default_str();
  cmd->add_option("--fov", o.pipeline.fov_deg)->capture_default_str();
  cmd->add_option("--image-size", o.pipeline.image_size)->capture_default_str();
  cmd->add_option("--depth-tol", o.pipeline.depth_tol_m)->capture_default_str();
  cmd->add_option("--rel-depth-tol", o.pipeline.rel_depth_tol)->capture_default_str();
  cmd->add_option("--temperature", o.pipeline.temperature)->capture_default_str();
  cmd->add_option("--max-attempts", o.pipeline.max_attempts)->capture_default_str();
}

std::unique_ptr<spazer::VlmBackend> make_backend(const Options& o,
                                                 const spazer::Scene& scene) {
  if (o.backend == "remote") {
    if (o.endpoint.empty() || o.model.empty())
      throw BackendConfigError("remote backend needs --endpoint and --model");
    spazer::RemoteConfig cfg;
    cfg.endpoint = o.endpoint;
    cfg.model = o.model;
    cfg.timeout_s = o.timeout_s;
    cfg.max_image_px = o.max_image_px;
    return std::make_unique<spazer::RemoteBackend>(cfg);
  }
  if (o.backend == "scripted") {
    if (o.script_path.empty())
      throw BackendConfigError("scripted backend needs --script");
    std::ifstream in(o.script_path);
    if (!in) throw BackendConfigError("cannot open script file: " + o.script_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw BackendConfigError(std::string("bad script file: ") + e.what());
    }
    const json& arr = j.is_array() ? j : j.at("responses");
    std::vector<std::string> responses;
    for (const json& r : arr)
      responses.push_back(r.is_string() ? r.get<std::string>() : r.dump());
    return std::make_unique<spazer::ScriptedBackend>(std::move(responses));
  }
  // oracle: ground truth comes from the scene's queries file
  const std::string qpath =
      o.queries_path.empty() ? (fs::path(scene.dir) / "queries.jsonl").string()
                             : o.queries_path;
  if (!fs::exists(qpath))
    throw BackendConfigError("oracle backend needs a queries file (" + qpath + ")");
  return std::make_unique<spazer::OracleBackend>(scene, spazer::load_queries_jsonl(qpath),
                                                 o.pipeline);
}

spazer::PromptLibrary load_prompts(const Options& o) {
  return o.prompts_dir.empty() ? spazer::PromptLibrary::builtin()
                               : spazer::PromptLibrary::load_dir(o.prompts_dir);
}

spazer::Scene load_scene_or_exit(const std::string& dir) {
  try {
    return spazer::load_scene(dir);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot load scene '" << dir << "': " << e.what() << "\n";
    std::exit(kExitSceneLoad);
  }
}

int cmd_ground(const Options& o) {
  const spazer::Scene scene = load_scene_or_exit(o.scene_dir);
  std::unique_ptr<spazer::VlmBackend> backend;
  try {
    backend = make_backend(o, scene);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackendConfig;
  }

  const spazer::PromptLibrary prompts = load_prompts(o);
  spazer::GroundingAgent agent(scene, o.pipeline, *backend, prompts);
  agent.set_collect_artifacts(true);

  spazer::GroundingQuery query;
  query.text = o.query_text;
  try {
    const auto [result, trace] = agent.ground(query);

    fs::create_directories(o.out_dir);
    const fs::path trace_path = fs::path(o.out_dir) / "0_trace.json";
    {
      std::ofstream out(trace_path);
      out << spazer::trace_to_json(trace, o.pipeline).dump(2) << "\n";
    }
    const spazer::GroundingArtifacts& art = agent.artifacts();
    if (!art.screening_view.empty())
      cv::imwrite((fs::path(o.out_dir) / "0_screening_view.png").string(),
                  art.screening_view);
    if (!art.joint_global_view.empty())
      cv::imwrite((fs::path(o.out_dir) / "0_global_view.png").string(),
                  art.joint_global_view);
    for (const auto& [id, img] : art.keyframes)
      cv::imwrite((fs::path(o.out_dir) / ("0_keyframe_" + std::to_string(id) + ".png"))
                      .string(),
                  img);

    json out;
    out["final_id"] = result.final_id;
    out["box"] = {{"center", {result.box.center.x(), result.box.center.y(),
                              result.box.center.z()}},
                  {"size", {result.box.size.x(), result.box.size.y(),
                            result.box.size.z()}}};
    out["trace"] = trace_path.string();
    std::cout << out.dump() << std::endl;
    return 0;
  } catch (const spazer::EmptyDetections& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEmptyDetections;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_evaluate(const Options& o) {
  const spazer::Scene scene = load_scene_or_exit(o.scene_dir);
  if (o.queries_path.empty()) {
    std::cerr << "error: evaluate needs --queries\n";
    return 1;
  }
  std::unique_ptr<spazer::VlmBackend> backend;
  try {
    backend = make_backend(o, scene);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackendConfig;
  }

  try {
    const auto queries = spazer::load_queries_jsonl(o.queries_path);
    spazer::EvaluateOptions opts;
    opts.out_dir = o.out_dir;
    opts.parallel = o.parallel;
    const spazer::AccuracyReport report =
        spazer::run_evaluate(scene, queries, o.pipeline, *backend, opts, load_prompts(o));

    json summary;
    summary["queries"] = report.overall.count;
    summary["selection_accuracy"] = report.overall.selection_accuracy;
    for (const auto& [t, v] : report.overall.acc_at) {
      char key[32];
      std::snprintf(key, sizeof(key), "acc@%.2f", t);
      summary[key] = v;
    }
    summary["report"] = (fs::path(o.out_dir) / "report.json").string();
    std::cout << summary.dump() << std::endl;
    return 0;
  } catch (const spazer::EmptyDetections& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEmptyDetections;
  } catch (const spazer::EmptyRecords& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_render(const Options& o) {
  const spazer::Scene scene = load_scene_or_exit(o.scene_dir);
  const auto views = spazer::render_holistic_views(
      scene.cloud, scene.bounds, o.pipeline.n_views, o.pipeline.fov_deg,
      o.pipeline.image_size, o.pipeline.point_size_m);

  const fs::path view_dir = fs::path(o.out_dir) / "views";
  fs::create_directories(view_dir);
  for (const spazer::RenderedView& v : views) {
    cv::imwrite((view_dir / ("view_" + std::to_string(v.view_index) + ".png")).string(),
                v.image);
    std::vector<spazer::Mark> marks;
    for (const spazer::DetectedObject& d : scene.detections)
      if (const auto px = spazer::world_to_image(v.camera, d.bbox.center))
        marks.emplace_back(d.id, cv::Point2d(px->u, px->v));
    cv::imwrite(
        (view_dir / ("view_" + std::to_string(v.view_index) + "_annotated.png")).string(),
        spazer::annotate(v.image, marks, v.view_index));
  }
  std::cerr << "wrote " << views.size() << " views to " << view_dir << "\n";
  return 0;
}

int cmd_project(const Options& o) {
  const spazer::Scene scene = load_scene_or_exit(o.scene_dir);
  const fs::path proj_dir = fs::path(o.out_dir) / "projections";
  fs::create_directories(proj_dir);

  for (const spazer::DetectedObject& d : scene.detections) {
    json j;
    j["object_id"] = d.id;
    j["per_frame"] = json::array();
    for (const spazer::CameraFrame& f : scene.frames) {
      const int n = spazer::count_visible(d.bbox, f, o.pipeline.depth_tol_m,
                                          o.pipeline.rel_depth_tol);
      j["per_frame"].push_back({{"frame_id", f.frame_id}, {"visible_count", n}});
    }
    try {
      const spazer::KeyframeAssignment kf = spazer::select_keyframe(
          d.id, d.bbox, scene.frames, o.pipeline.depth_tol_m, o.pipeline.rel_depth_tol);
      j["keyframe"] = {{"frame_id", kf.frame_id},
                       {"visible_count", kf.visible_count},
                       {"crop_rect",
                        {kf.crop_rect.u_min, kf.crop_rect.v_min, kf.crop_rect.u_max,
                         kf.crop_rect.v_max}}};
    } catch (const spazer::NoVisibleFrame&) {
      j["keyframe"] = nullptr;
    }
    std::ofstream out(proj_dir / (std::to_string(d.id) + ".json"));
    out << j.dump(2) << "\n";
  }
  std::cerr << "wrote projections for " << scene.detections.size() << " objects\n";
  return 0;
}

int cmd_synth(const Options& o) {
  try {
    spazer::synth::generate(spazer::synth::make_default_spec(o.seed), o.out_dir);
    std::cerr << "synthetic scene written to " << o.out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-shot 3D visual grounding pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file (flags take precedence)");

  Options o;

  CLI::App* ground = app.add_subcommand("ground", "ground a single query");
  ground->add_option("--scene", o.scene_dir)->required();
  ground->add_option("--query,-q", o.query_text, "query text")->required();
  ground->add_option("--queries", o.queries_path, "queries file (oracle ground truth)");
  ground->add_option("--out", o.out_dir)->capture_default_str();
  add_pipeline_flags(ground, o);

  CLI::App* evaluate = app.add_subcommand("evaluate", "run a query suite and report");
  evaluate->add_option("--scene", o.scene_dir)->required();
  evaluate->add_option("--queries", o.queries_path)->required();
  evaluate->add_option("--out", o.out_dir)->capture_default_str();
  evaluate->add_option("--parallel", o.parallel, "concurrent queries")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_pipeline_flags(evaluate, o);

  CLI::App* render = app.add_subcommand("render", "write the holistic views");
  render->add_option("--scene", o.scene_dir)->required();
  render->add_option("--out", o.out_dir)->capture_default_str();
  add_pipeline_flags(render, o);

  CLI::App* project = app.add_subcommand("project", "per-object visibility & keyframes");
  project->add_option("--scene", o.scene_dir)->required();
  project->add_option("--out", o.out_dir)->capture_default_str();
  add_pipeline_flags(project, o);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--out", o.out_dir)->required();
  synth->add_option("--seed", o.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (ground->parsed()) return cmd_ground(o);
  if (evaluate->parsed()) return cmd_evaluate(o);
  if (render->parsed()) return cmd_render(o);
  if (project->parsed()) return cmd_project(o);
  if (synth->parsed()) return cmd_synth(o);
  return 1;
}
