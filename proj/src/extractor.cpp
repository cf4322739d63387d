#include "feclust/extractor.hpp"

#include "feclust/text.hpp"

namespace feclust::extractor {

ExtractionResult fetch_external_features(const ExtractorConfig& config,
                                         const std::vector<corpus::Review>& reviews) {
  ExtractionResult result;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);

  for (std::size_t start = 0; start < reviews.size(); start += batch) {
    const std::size_t end = std::min(reviews.size(), start + batch);
    nlohmann::json payload;
    payload["reviews"] = nlohmann::json::array();
    for (std::size_t i = start; i < end; ++i) {
      payload["reviews"].push_back({{"id", reviews[i].review_id}, {"text", reviews[i].body}});
    }

    auto res = remote::post_json(config.endpoint, payload, config.retry);
    if (!res.ok) {
      for (std::size_t i = start; i < end; ++i) {
        result.errors.push_back("review " + reviews[i].review_id + ": " + res.error);
      }
      continue;
    }
    if (!res.body.contains("features") || !res.body.at("features").is_array()) {
      result.errors.push_back("batch " + std::to_string(start) + ".." + std::to_string(end - 1) +
                              ": response missing features array, batch skipped");
      continue;
    }
    for (const auto& item : res.body.at("features")) {
      if (!item.contains("text") || !item.at("text").is_string()) {
        result.errors.push_back("batch " + std::to_string(start) + ".." + std::to_string(end - 1) +
                                ": feature entry without text, entry skipped");
        continue;
      }
      auto normalized = text::normalize_feature(item.at("text").get<std::string>());
      if (!normalized) continue;  // pure punctuation
      std::string review_id = item.value("review_id", std::string{});
      result.features.add(
          corpus::Feature::make(std::move(*normalized), std::move(review_id), config.source));
    }
  }
  return result;
}

}  // namespace feclust::extractor
