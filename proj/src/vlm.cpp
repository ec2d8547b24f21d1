#include "spazer/vlm.hpp"

#include "spazer/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

// httplib must come after Eigen/OpenCV: it drags in libc headers whose
// macros corrupt Eigen when included first.
#ifdef SPAZER_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

using nlohmann::json;

namespace spazer {
namespace {

const char kBase64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<unsigned char>& data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(kBase64Chars[(v >> 18) & 63]);
    out.push_back(kBase64Chars[(v >> 12) & 63]);
    out.push_back(kBase64Chars[(v >> 6) & 63]);
    out.push_back(kBase64Chars[v & 63]);
  }
  if (i + 1 == data.size()) {
    const unsigned v = data[i] << 16;
    out.push_back(kBase64Chars[(v >> 18) & 63]);
    out.push_back(kBase64Chars[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(kBase64Chars[(v >> 18) & 63]);
    out.push_back(kBase64Chars[(v >> 12) & 63]);
    out.push_back(kBase64Chars[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string encode_image_data_url(const cv::Mat& image, int max_image_px) {
  cv::Mat img = image;
  if (max_image_px > 0 && std::max(img.cols, img.rows) > max_image_px) {
    const double s = static_cast<double>(max_image_px) / std::max(img.cols, img.rows);
    cv::resize(img, img, cv::Size(), s, s, cv::INTER_AREA);
  }
  std::vector<unsigned char> png;
  cv::imencode(".png", img, png);
  return "data:image/png;base64," + base64_encode(png);
}

struct SplitUrl {
  std::string scheme_host_port;
  std::string base_path;
};

SplitUrl split_endpoint(const std::string& endpoint) {
  const std::size_t scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw TransportError("endpoint must include a scheme: " + endpoint);
  const std::size_t path_start = endpoint.find('/', scheme_end + 3);
  SplitUrl s;
  if (path_start == std::string::npos) {
    s.scheme_host_port = endpoint;
  } else {
    s.scheme_host_port = endpoint.substr(0, path_start);
    s.base_path = endpoint.substr(path_start);
    while (!s.base_path.empty() && s.base_path.back() == '/') s.base_path.pop_back();
  }
  return s;
}

}  // namespace

std::string VlmRequest::joined_text() const {
  std::string out;
  for (const VlmPart& p : parts)
    if (const std::string* t = std::get_if<std::string>(&p)) {
      if (!out.empty()) out += "\n";
      out += *t;
    }
  return out;
}

json build_chat_request(const VlmRequest& request, const std::string& model,
                        int max_image_px) {
  bool has_text = false;
  for (const VlmPart& p : request.parts) has_text |= std::holds_alternative<std::string>(p);
  if (!has_text) throw Error("request needs at least one text part");
  if (request.temperature < 0.0 || request.temperature > 2.0)
    throw Error("temperature must be in [0, 2]");

  json content = json::array();
  for (const VlmPart& part : request.parts) {
    if (const std::string* text = std::get_if<std::string>(&part)) {
      content.push_back({{"type", "text"}, {"text", *text}});
    } else {
      const cv::Mat& img = std::get<cv::Mat>(part);
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", encode_image_data_url(img, max_image_px)}}}});
    }
  }
  json body;
  body["model"] = model;
  body["temperature"] = request.temperature;
  body["messages"] = json::array({{{"role", "user"}, {"content", content}}});
  return body;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {}

Completion RemoteBackend::complete(const VlmRequest& request) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key)
    throw MissingCredential("set " + config_.api_key_env + " for the remote backend");

  const SplitUrl url = split_endpoint(config_.endpoint);
  const std::string body = build_chat_request(request, config_.model,
                                              config_.max_image_px).dump();
  const std::string path = url.base_path + "/chat/completions";

  std::mt19937 jitter_rng(std::random_device{}());
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  std::string last_error;

  const int attempts_allowed = std::max(1, request.max_attempts);
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    httplib::Client cli(url.scheme_host_port);
    cli.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
    cli.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
    cli.set_default_headers({{"Authorization", std::string("Bearer ") + key}});

    httplib::Result res = cli.Post(path, body, "application/json");
    if (res && res->status == 200) {
      try {
        const json reply = json::parse(res->body);
        return {reply.at("choices").at(0).at("message").at("content").get<std::string>(),
                attempt};
      } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected response shape: ") + e.what());
      }
    }
    if (res && res->status != 429 && (res->status < 500 || res->status >= 600))
      throw TransportError("request failed with status " + std::to_string(res->status) +
                           ": " + res->body);
    last_error = res ? "status " + std::to_string(res->status)
                     : "transport error " + httplib::to_string(res.error());
    if (attempt < attempts_allowed) {
      const double delay =
          config_.retry_base_s * std::pow(2.0, attempt - 1) * jitter(jitter_rng);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
  throw TransportError("gave up after " + std::to_string(attempts_allowed) +
                       " attempts (" + last_error + ")");
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses)
    : responses_(std::move(responses)) {}

Completion ScriptedBackend::complete(const VlmRequest&) {
  std::lock_guard lock(mu_);
  if (next_ >= responses_.size())
    throw ScriptExhausted("scripted backend exhausted after " +
                          std::to_string(responses_.size()) + " responses");
  return {responses_[next_++], 1};
}

void ScriptedBackend::reset() {
  std::lock_guard lock(mu_);
  next_ = 0;
}

int ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return static_cast<int>(next_);
}

json parse_json_payload(const std::string& text) {
  // drop markdown fence lines, keep everything else verbatim
  std::string cleaned;
  cleaned.reserve(text.size());
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::size_t first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line.compare(first, 3, "```") == 0) continue;
    cleaned += line;
    cleaned += '\n';
  }

  const std::size_t start = cleaned.find('{');
  if (start == std::string::npos) throw NoJsonFound("no '{' in model output");

  bool in_string = false;
  bool escaped = false;
  int depth = 0;
  for (std::size_t i = start; i < cleaned.size(); ++i) {
    const char c = cleaned[i];
    if (escaped) { escaped = false; continue; }
    if (c == '\\' && in_string) { escaped = true; continue; }
    if (c == '"') { in_string = !in_string; continue; }
    if (in_string) continue;
    if (c == '{') ++depth;
    else if (c == '}') {
      if (--depth == 0) {
        try {
          return json::parse(cleaned.substr(start, i - start + 1));
        } catch (const json::exception&) {
          throw NoJsonFound("balanced braces found but content is not valid JSON");
        }
      }
    }
  }
  throw UnbalancedBraces("unterminated '{' in model output");
}

}  // namespace spazer
