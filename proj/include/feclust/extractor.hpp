#pragma once

#include <string>
#include <vector>

#include "feclust/corpus.hpp"
#include "feclust/remote.hpp"

namespace feclust::extractor {

struct ExtractorConfig {
  std::string endpoint;
  corpus::FeatureSource source = corpus::FeatureSource::syntactic;
  std::size_t batch_size = 32;
  remote::RetryPolicy retry;
};

struct ExtractionResult {
  corpus::FeatureSet features;
  // One entry per review whose batch ultimately failed; batch-level parse
  // problems land here too, prefixed with the batch range.
  std::vector<std::string> errors;
};

/// Client for an external feature-extraction service.
/// Wire: POST {"reviews":[{"id","text"}]} -> {"features":[{"review_id","text"}]}.
/// Network failure after retries yields a partial set plus per-review errors;
/// a malformed response skips that batch with a diagnostic.
ExtractionResult fetch_external_features(const ExtractorConfig& config,
                                         const std::vector<corpus::Review>& reviews);

}  // namespace feclust::extractor
