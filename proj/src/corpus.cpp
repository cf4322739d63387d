#include "feclust/corpus.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "feclust/text.hpp"
#include "feclust/util.hpp"

namespace feclust::corpus {

std::string_view to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::syntactic: return "syntactic";
    case FeatureSource::llm: return "llm";
    case FeatureSource::hybrid: return "hybrid";
    case FeatureSource::gold: return "gold";
  }
  return "syntactic";
}

FeatureSource feature_source_from_string(std::string_view s) {
  if (s == "syntactic") return FeatureSource::syntactic;
  if (s == "llm") return FeatureSource::llm;
  if (s == "hybrid") return FeatureSource::hybrid;
  if (s == "gold") return FeatureSource::gold;
  throw std::invalid_argument("unknown feature source: " + std::string(s));
}

Feature Feature::make(std::string surface, std::string review_id, FeatureSource source) {
  Feature f;
  f.tokens = text::tokenize(surface);
  if (f.tokens.empty()) {
    throw std::invalid_argument("feature surface has no tokens: '" + surface + "'");
  }
  f.surface = std::move(surface);
  f.review_id = std::move(review_id);
  f.source = source;
  return f;
}

bool FeatureSet::add(Feature f, std::int64_t count) {
  if (count < 1) {
    throw std::invalid_argument("feature occurrence count must be >= 1");
  }
  total_occurrences_ += count;
  auto it = index_.find(f.surface);
  if (it != index_.end()) {
    frequency_[f.surface] += count;
    return false;
  }
  index_.emplace(f.surface, features_.size());
  frequency_.emplace(f.surface, count);
  features_.push_back(std::move(f));
  return true;
}

bool FeatureSet::contains(std::string_view surface) const {
  return index_.find(surface) != index_.end();
}

const Feature* FeatureSet::find(std::string_view surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? nullptr : &features_[it->second];
}

std::int64_t FeatureSet::frequency(std::string_view surface) const {
  auto it = frequency_.find(surface);
  return it == frequency_.end() ? 0 : it->second;
}

void FeatureSet::set_source(std::string_view surface, FeatureSource source) {
  auto it = index_.find(surface);
  if (it != index_.end()) {
    features_[it->second].source = source;
  }
}

std::vector<std::string> FeatureSet::surfaces() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.surface);
  return out;
}

FeatureSet merge_feature_sets(const FeatureSet& a, const FeatureSet& b) {
  FeatureSet out;
  for (const auto& f : a.features()) {
    out.add(f, a.frequency(f.surface));
  }
  for (const auto& f : b.features()) {
    bool novel = out.add(f, b.frequency(f.surface));
    if (!novel) {
      out.set_source(f.surface, FeatureSource::hybrid);
    }
  }
  return out;
}

std::vector<Review> read_reviews_jsonl(const std::filesystem::path& path, IngestStats* stats) {
  std::vector<Review> reviews;
  std::set<std::string> seen_ids;
  util::for_each_jsonl(path, [&](std::size_t lineno, const json& obj) {
    if (stats) ++stats->reviews_read;
    if (!obj.contains("review_id") || !obj.contains("app_id") || !obj.contains("body")) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) +
                          ": review object needs review_id, app_id, body");
    }
    Review r;
    r.review_id = obj.at("review_id").get<std::string>();
    r.app_id = obj.at("app_id").get<std::string>();
    r.body = obj.at("body").get<std::string>();
    if (obj.contains("submitted_at") && !obj.at("submitted_at").is_null()) {
      r.submitted_at = obj.at("submitted_at").get<std::string>();
    }
    if (r.review_id.empty()) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) + ": empty review_id");
    }
    if (!seen_ids.insert(r.review_id).second) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) +
                          ": duplicate review_id '" + r.review_id + "'");
    }
    if (r.body.empty()) {
      if (stats) ++stats->reviews_skipped_empty;
      return;
    }
    reviews.push_back(std::move(r));
  });
  return reviews;
}

void write_reviews_jsonl(const std::filesystem::path& path, const std::vector<Review>& reviews) {
  std::ostringstream out;
  for (const auto& r : reviews) {
    json obj;
    obj["review_id"] = r.review_id;
    obj["app_id"] = r.app_id;
    obj["body"] = r.body;
    if (r.submitted_at) obj["submitted_at"] = *r.submitted_at;
    out << obj.dump() << '\n';
  }
  util::write_file(path, out.str());
}

std::vector<Review> preprocess_reviews(const std::vector<Review>& reviews, IngestStats* stats) {
  std::vector<Review> out;
  out.reserve(reviews.size());
  for (const auto& r : reviews) {
    auto cleaned = text::preprocess_review(r.body);
    if (!cleaned) {
      if (stats) ++stats->reviews_skipped_empty;
      continue;
    }
    Review c = r;
    c.body = std::move(*cleaned);
    out.push_back(std::move(c));
  }
  return out;
}

FeatureSet read_features_jsonl(const std::filesystem::path& path, DedupScope scope,
                               std::optional<FeatureSource> source_override,
                               IngestStats* stats) {
  FeatureSet set;
  std::set<std::pair<std::string, std::string>> per_review_seen;
  util::for_each_jsonl(path, [&](std::size_t lineno, const json& obj) {
    if (stats) ++stats->features_read;
    if (!obj.contains("surface")) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) +
                          ": feature object needs a surface");
    }
    auto normalized = text::normalize_feature(obj.at("surface").get<std::string>());
    if (!normalized) {
      if (stats) ++stats->features_rejected;
      return;
    }
    std::string review_id = obj.value("review_id", std::string{});
    FeatureSource source = source_override
                               ? *source_override
                               : feature_source_from_string(obj.value("source", "syntactic"));
    std::int64_t freq = obj.value("freq", std::int64_t{1});
    if (scope == DedupScope::per_review) {
      if (!per_review_seen.insert({review_id, *normalized}).second) return;
      freq = 1;
    }
    set.add(Feature::make(std::move(*normalized), std::move(review_id), source), freq);
  });
  return set;
}

void write_features_jsonl(const std::filesystem::path& path, const FeatureSet& set) {
  std::ostringstream out;
  for (const auto& f : set.features()) {
    json obj;
    obj["surface"] = f.surface;
    obj["review_id"] = f.review_id;
    obj["source"] = std::string(to_string(f.source));
    obj["freq"] = set.frequency(f.surface);
    out << obj.dump() << '\n';
  }
  util::write_file(path, out.str());
}

std::vector<std::size_t> largest_remainder_allocation(const std::vector<std::int64_t>& counts,
                                                      std::size_t size) {
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw std::invalid_argument("negative group count");
    total += c;
  }
  std::vector<std::size_t> alloc(counts.size(), 0);
  if (total == 0 || size == 0) return alloc;

  // Exact integer arithmetic: floor(size*c/total) with the remainder kept as
  // an integer so remainder comparison is exact.
  std::vector<unsigned __int128> remainder(counts.size(), 0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    unsigned __int128 num =
        static_cast<unsigned __int128>(size) * static_cast<unsigned __int128>(counts[i]);
    alloc[i] = static_cast<std::size_t>(num / static_cast<unsigned __int128>(total));
    remainder[i] = num % static_cast<unsigned __int128>(total);
    assigned += alloc[i];
  }

  // Remainder units: apps rounded to zero (but with a positive share) first,
  // then by largest remainder; ties by larger count, then input order.
  std::vector<std::size_t> order(counts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    bool za = alloc[a] == 0 && counts[a] > 0;
    bool zb = alloc[b] == 0 && counts[b] > 0;
    if (za != zb) return za;
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return counts[a] > counts[b];
  });
  for (std::size_t u = 0; u < size - assigned; ++u) {
    alloc[order[u]] += 1;
  }
  return alloc;
}

std::vector<Review> stratified_sample(const std::vector<Review>& reviews, std::size_t size,
                                      std::uint64_t seed) {
  if (size > reviews.size()) {
    throw std::invalid_argument("sample size exceeds corpus size");
  }
  if (size == 0) return {};

  std::vector<std::string> app_order;
  std::map<std::string, std::vector<std::size_t>> by_app;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    auto [it, inserted] = by_app.try_emplace(reviews[i].app_id);
    if (inserted) app_order.push_back(reviews[i].app_id);
    it->second.push_back(i);
  }

  std::vector<std::int64_t> counts;
  counts.reserve(app_order.size());
  for (const auto& app : app_order) {
    counts.push_back(static_cast<std::int64_t>(by_app[app].size()));
  }
  std::vector<std::size_t> alloc = largest_remainder_allocation(counts, size);

  // rng() % m keeps the draw sequence identical across standard libraries.
  std::mt19937_64 rng(seed);
  std::vector<char> selected(reviews.size(), 0);
  for (std::size_t a = 0; a < app_order.size(); ++a) {
    std::vector<std::size_t> idx = by_app[app_order[a]];
    const std::size_t take = alloc[a];
    for (std::size_t j = 0; j < take; ++j) {
      std::size_t pick = j + static_cast<std::size_t>(rng() % (idx.size() - j));
      std::swap(idx[j], idx[pick]);
      selected[idx[j]] = 1;
    }
  }

  std::vector<Review> out;
  out.reserve(size);
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    if (selected[i]) out.push_back(reviews[i]);
  }
  return out;
}

}  // namespace feclust::corpus
