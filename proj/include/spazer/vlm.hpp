#pragma once

#include "spazer/types.hpp"

#include <nlohmann/json.hpp>

#include <mutex>
#include <string>
#include <variant>
#include <vector>

namespace spazer {

/// A request part is either prompt text or an image.
using VlmPart = std::variant<std::string, cv::Mat>;

struct VlmRequest {
  std::vector<VlmPart> parts;
  double temperature = 0.2;
  int max_attempts = 3;

  void add_text(std::string text) { parts.emplace_back(std::move(text)); }
  void add_image(cv::Mat image) { parts.emplace_back(std::move(image)); }
  std::string joined_text() const;
};

struct Completion {
  std::string text;
  int attempts = 1;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual Completion complete(const VlmRequest& request) = 0;
  virtual std::string name() const = 0;
};

struct RemoteConfig {
  std::string endpoint;  // chat-completions base, e.g. https://host/v1
  std::string model;
  std::string api_key_env = "VLM_API_KEY";
  double timeout_s = 60.0;
  double retry_base_s = 1.0;  // exponential backoff base
  int max_image_px = 0;       // 0 = send images at native resolution
};

/// OpenAI-style chat-completions transport. Images go base64-inline in a
/// single multimodal user message; timeouts, 429 and 5xx are retried with
/// exponential backoff up to request.max_attempts.
class RemoteBackend : public VlmBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  Completion complete(const VlmRequest& request) override;
  std::string name() const override { return "remote"; }

 private:
  RemoteConfig config_;
};

/// Replays a fixed response list; throws ScriptExhausted past the end.
class ScriptedBackend : public VlmBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> responses);
  Completion complete(const VlmRequest& request) override;
  std::string name() const override { return "scripted"; }
  void reset();
  int calls() const;

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  mutable std::mutex mu_;
};

/// Request body sent to <endpoint>/chat/completions (exposed for tests).
nlohmann::json build_chat_request(const VlmRequest& request, const std::string& model,
                                  int max_image_px = 0);

/// Extracts the first balanced top-level JSON object from model output,
/// tolerating markdown code fences and surrounding prose. Throws
/// NoJsonFound / UnbalancedBraces.
nlohmann::json parse_json_payload(const std::string& text);

}  // namespace spazer
