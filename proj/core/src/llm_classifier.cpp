#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "restlog/error.hpp"
#include "restlog/resource_analysis.hpp"

namespace restlog {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "LLM endpoint must be an absolute URL: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

CompletionFn http_chat_completion(const LlmOptions& options) {
  Endpoint ep = split_endpoint(options.endpoint);
  return [ep, options](const std::string& prompt) -> std::string {
    httplib::Client client(ep.origin);
    if (!client.is_valid()) {
      throw Error(ErrorCode::ClassifierUnavailable, "unsupported LLM endpoint " + ep.origin);
    }
    const auto secs = options.timeout_ms / 1000;
    const auto usecs = (options.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    httplib::Headers headers;
    if (!options.api_key_env.empty()) {
      if (const char* key = std::getenv(options.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    nlohmann::json body = {
        {"model", options.model},
        {"temperature", 0},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
    };
    auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::ClassifierUnavailable,
                  "LLM endpoint unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status / 100 != 2) {
      throw Error(ErrorCode::ClassifierUnavailable,
                  "LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
      throw Error(ErrorCode::ClassifierUnavailable, "LLM reply is not JSON");
    }
    const auto ptr = nlohmann::json::json_pointer("/choices/0/message/content");
    if (!reply.contains(ptr) || !reply[ptr].is_string()) {
      throw Error(ErrorCode::ClassifierUnavailable, "LLM reply lacks choices[0].message.content");
    }
    return reply[ptr].get<std::string>();
  };
}

}  // namespace restlog
