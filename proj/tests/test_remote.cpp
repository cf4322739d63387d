#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "feclust/embed.hpp"
#include "feclust/util.hpp"
#include "feclust/extractor.hpp"
#include "feclust/taxonomy.hpp"

using namespace feclust;
using nlohmann::json;

namespace {

// Local HTTP fixture; each test installs handlers then talks to 127.0.0.1.
struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  TestServer() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port) + path;
  }
};

remote::RetryPolicy fast_retry() {
  remote::RetryPolicy policy;
  policy.attempts = 3;
  policy.backoff_ms = 1;
  return policy;
}

}  // namespace

TEST_CASE("extractor client round trip") {
  TestServer ts;
  ts.server.Post("/extract", [](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    json features = json::array();
    for (const auto& r : body.at("reviews")) {
      features.push_back({{"review_id", r.at("id")},
                          {"text", "Dark Mode"}});
    }
    res.set_content(json{{"features", features}}.dump(), "application/json");
  });

  extractor::ExtractorConfig config;
  config.endpoint = ts.url("/extract");
  config.source = corpus::FeatureSource::syntactic;
  config.batch_size = 2;
  config.retry = fast_retry();

  std::vector<corpus::Review> reviews = {
      {"r1", "a", "text one", std::nullopt},
      {"r2", "a", "text two", std::nullopt},
      {"r3", "b", "text three", std::nullopt},
  };
  auto result = extractor::fetch_external_features(config, reviews);
  CHECK(result.errors.empty());
  REQUIRE(result.features.size() == 1);  // all three normalize to the same surface
  CHECK(result.features.features()[0].surface == "dark mode");
  CHECK(result.features.frequency("dark mode") == 3);
  CHECK(result.features.features()[0].source == corpus::FeatureSource::syntactic);
}

TEST_CASE("extractor retries transient failures") {
  TestServer ts;
  std::atomic<int> calls{0};
  ts.server.Post("/extract", [&](const httplib::Request&, httplib::Response& res) {
    if (calls.fetch_add(1) == 0) {
      res.status = 503;
      return;
    }
    res.set_content(json{{"features", json::array({{{"review_id", "r1"}, {"text", "queue"}}})}}
                        .dump(),
                    "application/json");
  });

  extractor::ExtractorConfig config;
  config.endpoint = ts.url("/extract");
  config.retry = fast_retry();
  auto result =
      extractor::fetch_external_features(config, {{"r1", "a", "body", std::nullopt}});
  CHECK(calls.load() == 2);
  CHECK(result.errors.empty());
  CHECK(result.features.contains("queue"));
}

TEST_CASE("extractor reports failed batches per review and keeps going") {
  TestServer ts;
  std::atomic<int> calls{0};
  ts.server.Post("/extract", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    const std::string first_id = body.at("reviews").at(0).at("id").get<std::string>();
    ++calls;
    if (first_id == "r1") {
      res.status = 500;  // first batch permanently broken
      return;
    }
    res.set_content(json{{"features", json::array({{{"review_id", first_id}, {"text", "zoom"}}})}}
                        .dump(),
                    "application/json");
  });

  extractor::ExtractorConfig config;
  config.endpoint = ts.url("/extract");
  config.batch_size = 1;
  config.retry = fast_retry();
  auto result = extractor::fetch_external_features(
      config, {{"r1", "a", "x", std::nullopt}, {"r2", "a", "y", std::nullopt}});
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].find("r1") != std::string::npos);
  CHECK(result.features.contains("zoom"));  // partial set delivered
}

TEST_CASE("extractor skips malformed responses with a diagnostic") {
  TestServer ts;
  ts.server.Post("/extract", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"unexpected", 1}}.dump(), "application/json");
  });
  extractor::ExtractorConfig config;
  config.endpoint = ts.url("/extract");
  config.retry = fast_retry();
  auto result =
      extractor::fetch_external_features(config, {{"r1", "a", "x", std::nullopt}});
  CHECK(result.features.empty());
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].find("batch") != std::string::npos);
}

TEST_CASE("remote embedding provider honors the wire protocol") {
  TestServer ts;
  ts.server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    REQUIRE(body.at("model") == "test-model");
    json data = json::array();
    // deliberately reversed order: the client must place by index
    const auto& inputs = body.at("input");
    for (std::size_t i = inputs.size(); i-- > 0;) {
      const double x = 1.0 + static_cast<double>(i);
      data.push_back({{"index", i}, {"embedding", {x, 0.0, 0.0, 1.0}}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });

  embed::RemoteEmbeddingConfig config;
  config.endpoint = ts.url("/v1/embeddings");
  config.model = "test-model";
  config.retry = fast_retry();
  embed::RemoteProvider provider(config);

  corpus::FeatureSet features;
  features.add(corpus::Feature::make("alpha", "r", corpus::FeatureSource::llm));
  features.add(corpus::Feature::make("beta", "r", corpus::FeatureSource::llm));
  auto matrix = embed::embed_features(features, provider);
  REQUIRE(matrix.rows() == 2);
  CHECK(matrix.dim == 4);
  // row 0 must be the index-0 vector (1,0,0,1)/sqrt(2), not the reversed one
  CHECK(matrix.row(0)[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(matrix.row(1)[0] == doctest::Approx(2.0 / std::sqrt(5.0)));
}

TEST_CASE("embedding dimension mismatch across batches aborts") {
  TestServer ts;
  std::atomic<int> calls{0};
  ts.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    const std::size_t dim = calls.fetch_add(1) == 0 ? 4 : 3;
    json data = json::array();
    for (std::size_t i = 0; i < body.at("input").size(); ++i) {
      std::vector<double> vec(dim, 0.0);
      vec[0] = 1.0;
      data.push_back({{"index", i}, {"embedding", vec}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });

  embed::RemoteEmbeddingConfig config;
  config.endpoint = ts.url("/v1/embeddings");
  config.model = "m";
  config.retry = fast_retry();
  embed::RemoteProvider provider(config);

  corpus::FeatureSet features;
  features.add(corpus::Feature::make("alpha", "r", corpus::FeatureSource::llm));
  features.add(corpus::Feature::make("beta", "r", corpus::FeatureSource::llm));
  embed::EmbedOptions options;
  options.batch_size = 1;
  options.max_in_flight = 1;
  CHECK_THROWS_WITH_AS(embed::embed_features(features, provider, options),
                       doctest::Contains("dimension mismatch"), PipelineError);
}

TEST_CASE("embed_features aborts with failed surfaces on persistent failure") {
  TestServer ts;
  ts.server.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
  });
  embed::RemoteEmbeddingConfig config;
  config.endpoint = ts.url("/v1/embeddings");
  config.model = "m";
  config.retry = fast_retry();
  embed::RemoteProvider provider(config);

  corpus::FeatureSet features;
  features.add(corpus::Feature::make("alpha", "r", corpus::FeatureSource::llm));
  CHECK_THROWS_WITH_AS(embed::embed_features(features, provider),
                       doctest::Contains("alpha"), PipelineError);
}

TEST_CASE("remote labeler builds few-shot messages and trims the reply") {
  TestServer ts;
  ts.server.Post("/v1/chat", [](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    REQUIRE(body.at("temperature") == 0.0);
    const auto& messages = body.at("messages");
    // system + 2 few-shot pairs + final user message
    REQUIRE(messages.size() == 6);
    CHECK(messages.at(0).at("role") == "system");
    CHECK(messages.at(1).at("role") == "user");
    CHECK(messages.at(2).at("role") == "assistant");
    CHECK(messages.at(5).at("role") == "user");
    CHECK(messages.at(5).at("content").get<std::string>().find("advise") != std::string::npos);
    res.set_content(
        json{{"choices",
              json::array({{{"message",
                             {{"content", "  Guidance And Advice Tools Extra Words Beyond"}}}}})}}
            .dump(),
        "application/json");
  });

  taxonomy::LabelerConfig config;
  config.mode = taxonomy::LabelerMode::remote_llm;
  config.endpoint = ts.url("/v1/chat");
  config.model = "chat-model";
  config.max_label_tokens = 4;
  config.few_shot_examples = {{{"a", "b"}, "pair one"}, {{"c"}, "pair two"}};
  config.retry = fast_retry();
  taxonomy::RemoteLabeler labeler(config);

  auto label = labeler.label({"advise", "advice", "guidance"});
  CHECK(label == "guidance and advice tools");  // lowercased, 4 tokens
  CHECK_FALSE(labeler.last_call_degraded());
}

TEST_CASE("remote labeler falls back to the stub on failure and empty replies") {
  TestServer ts;
  std::atomic<bool> empty_reply{false};
  ts.server.Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
    if (empty_reply) {
      res.set_content(
          json{{"choices", json::array({{{"message", {{"content", "   "}}}}})}}.dump(),
          "application/json");
    } else {
      res.status = 500;
    }
  });

  taxonomy::LabelerConfig config;
  config.mode = taxonomy::LabelerMode::remote_llm;
  config.endpoint = ts.url("/v1/chat");
  config.model = "m";
  config.few_shot_examples = {{{"a"}, "x"}};
  config.retry = fast_retry();
  taxonomy::RemoteLabeler labeler(config);

  auto label = labeler.label({"advise", "advice"});
  CHECK(label == taxonomy::stub_label({"advise", "advice"}));
  CHECK(labeler.last_call_degraded());

  empty_reply = true;
  auto label2 = labeler.label({"bot"});
  CHECK(label2 == "bot");
  CHECK(labeler.last_call_degraded());
}

TEST_CASE("remote labeler requires a few-shot example") {
  taxonomy::LabelerConfig config;
  config.mode = taxonomy::LabelerMode::remote_llm;
  config.endpoint = "http://127.0.0.1:1/v1/chat";
  CHECK_THROWS(taxonomy::RemoteLabeler{config});
}

TEST_CASE("api key goes out as a bearer header") {
  TestServer ts;
  std::string seen_auth;
  ts.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    res.set_content(
        json{{"choices", json::array({{{"message", {{"content", "label"}}}}})}}.dump(),
        "application/json");
  });

  taxonomy::LabelerConfig config;
  config.mode = taxonomy::LabelerMode::remote_llm;
  config.endpoint = ts.url("/v1/chat");
  config.few_shot_examples = {{{"a"}, "x"}};
  config.api_key = "secret-token";
  config.retry = fast_retry();
  taxonomy::RemoteLabeler labeler(config);
  labeler.label({"anything"});
  CHECK(seen_auth == "Bearer secret-token");
}
