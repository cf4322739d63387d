#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace feclust::remote {

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 200;  // doubles per retry
};

struct PostResult {
  bool ok = false;
  int status = 0;
  nlohmann::json body;
  std::string error;  // transport or parse diagnostic when !ok
};

/// POSTs `payload` as JSON to a full URL ("http://host:port/path"),
/// retrying transport failures and 5xx with exponential backoff.
/// `bearer_token`, when set, goes out as an Authorization header.
PostResult post_json(const std::string& url, const nlohmann::json& payload,
                     const RetryPolicy& policy,
                     const std::optional<std::string>& bearer_token = std::nullopt);

}  // namespace feclust::remote
