#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace feclust::corpus {

struct Review {
  std::string review_id;
  std::string app_id;
  std::string body;
  std::optional<std::string> submitted_at;
};

enum class FeatureSource { syntactic, llm, hybrid, gold };

std::string_view to_string(FeatureSource s);
FeatureSource feature_source_from_string(std::string_view s);

struct Feature {
  std::string surface;               // normalized
  std::vector<std::string> tokens;   // space-join reproduces surface
  std::string review_id;
  FeatureSource source = FeatureSource::syntactic;

  static Feature make(std::string surface, std::string review_id, FeatureSource source);
};

enum class DedupScope {
  corpus_global,  // every occurrence counts toward frequency (default)
  per_review,     // repeats of a surface within one review count once
};

/// Ordered, surface-deduplicated feature collection with occurrence counts.
class FeatureSet {
 public:
  FeatureSet() = default;

  /// Adds one occurrence. Returns true when the surface was new.
  bool add(Feature f, std::int64_t count = 1);

  const std::vector<Feature>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  bool empty() const { return features_.empty(); }

  bool contains(std::string_view surface) const;
  const Feature* find(std::string_view surface) const;
  std::int64_t frequency(std::string_view surface) const;
  std::int64_t total_occurrences() const { return total_occurrences_; }

  void set_source(std::string_view surface, FeatureSource source);

  std::vector<std::string> surfaces() const;

 private:
  std::vector<Feature> features_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<std::string, std::int64_t, std::less<>> frequency_;
  std::int64_t total_occurrences_ = 0;
};

/// Union by normalized surface: a's order, then b's novel entries. On
/// collision the earliest occurrence is kept, its source becomes hybrid and
/// the frequencies sum.
FeatureSet merge_feature_sets(const FeatureSet& a, const FeatureSet& b);

struct IngestStats {
  std::size_t reviews_read = 0;
  std::size_t reviews_skipped_empty = 0;
  std::size_t features_read = 0;
  std::size_t features_rejected = 0;
};

std::vector<Review> read_reviews_jsonl(const std::filesystem::path& path, IngestStats* stats = nullptr);
void write_reviews_jsonl(const std::filesystem::path& path, const std::vector<Review>& reviews);

/// Applies preprocess_review to every body; empty-after-cleaning reviews are
/// dropped and counted, not fatal.
std::vector<Review> preprocess_reviews(const std::vector<Review>& reviews, IngestStats* stats = nullptr);

/// Reads a features JSONL file ({"surface","review_id","source","freq"}),
/// normalizing surfaces and dropping pure-punctuation rejects.
FeatureSet read_features_jsonl(const std::filesystem::path& path,
                               DedupScope scope = DedupScope::corpus_global,
                               std::optional<FeatureSource> source_override = std::nullopt,
                               IngestStats* stats = nullptr);
void write_features_jsonl(const std::filesystem::path& path, const FeatureSet& set);

/// Proportional per-app sample (largest-remainder rounding, remainder
/// priority to apps rounded to zero). Deterministic in `seed`; output keeps
/// corpus order.
std::vector<Review> stratified_sample(const std::vector<Review>& reviews, std::size_t size,
                                      std::uint64_t seed);

/// Exact largest-remainder allocation used by stratified_sample.
std::vector<std::size_t> largest_remainder_allocation(const std::vector<std::int64_t>& counts,
                                                      std::size_t size);

}  // namespace feclust::corpus
