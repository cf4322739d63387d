#include "feclust/remote.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

namespace feclust::remote {

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /path or "/"
};

std::optional<SplitUrl> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return std::nullopt;
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return SplitUrl{url, "/"};
  }
  return SplitUrl{url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

PostResult post_json(const std::string& url, const nlohmann::json& payload,
                     const RetryPolicy& policy, const std::optional<std::string>& bearer_token) {
  PostResult result;
  auto split = split_url(url);
  if (!split) {
    result.error = "invalid endpoint URL: " + url;
    return result;
  }

  const std::string body = payload.dump();
  int delay_ms = policy.backoff_ms;
  for (int attempt = 0; attempt < std::max(1, policy.attempts); ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    httplib::Client client(split->base);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers;
    if (bearer_token && !bearer_token->empty()) {
      headers.emplace("Authorization", "Bearer " + *bearer_token);
    }
    auto res = client.Post(split->path, headers, body, "application/json");
    if (!res) {
      result.error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    result.status = res->status;
    if (res->status >= 500) {
      result.error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      result.error = "unexpected status " + std::to_string(res->status);
      return result;  // 4xx: retrying will not help
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      result.error = "response is not valid JSON";
      return result;
    }
    result.ok = true;
    result.body = std::move(parsed);
    result.error.clear();
    return result;
  }
  return result;
}

}  // namespace feclust::remote
