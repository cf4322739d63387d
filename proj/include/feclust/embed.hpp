#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "feclust/corpus.hpp"
#include "feclust/remote.hpp"

namespace feclust::embed {

/// Row-per-feature dense matrix; rows are unit vectors in FeatureSet order.
struct EmbeddingMatrix {
  std::vector<std::string> ids;  // feature surfaces
  std::size_t dim = 0;
  std::vector<double> data;  // row-major, ids.size() x dim
  std::string provider_tag;

  std::size_t rows() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data.data() + i * dim, dim);
  }
  std::span<double> row(std::size_t i) {
    return std::span<double>(data.data() + i * dim, dim);
  }
};

/// Pairwise cosine dissimilarity (1 - dot on unit rows). Symmetric, zero
/// diagonal, entries in [0, 2].
struct AffinityMatrix {
  std::size_t n = 0;
  std::vector<double> dist;  // row-major n x n
  std::string metric_tag = "cosine";

  double at(std::size_t i, std::size_t j) const { return dist[i * n + j]; }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string tag() const = 0;
  /// One vector per input, index-aligned. Throws on unrecoverable failure.
  virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> inputs) = 0;
};

/// Deterministic offline provider: character 3-grams of the space-padded
/// surface hashed into `dim` signed buckets, L2-normalized.
class HashingProvider final : public EmbeddingProvider {
 public:
  HashingProvider(std::size_t dim, std::uint64_t seed);
  std::string tag() const override;
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> inputs) override;

  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

std::vector<double> hashing_embed(std::string_view surface, std::size_t dim, std::uint64_t seed);

struct RemoteEmbeddingConfig {
  std::string endpoint;
  std::string model;
  remote::RetryPolicy retry;
};

/// Client for {"model","input":[...]} -> {"data":[{"index","embedding"}]}.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(RemoteEmbeddingConfig config);
  std::string tag() const override;
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> inputs) override;

 private:
  RemoteEmbeddingConfig config_;
};

struct EmbedOptions {
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  std::filesystem::path cache_path;  // empty: no cache
};

/// Embeds every unique feature, in FeatureSet order; rows re-normalized to
/// unit length whatever the provider returned. Dimension mismatches across
/// batches abort; provider failures abort with the failed surfaces listed.
EmbeddingMatrix embed_features(const corpus::FeatureSet& features, EmbeddingProvider& provider,
                               const EmbedOptions& options = {});

/// Embeds arbitrary label strings with the same contract (used for taxonomy
/// root labels).
EmbeddingMatrix embed_strings(const std::vector<std::string>& inputs, EmbeddingProvider& provider,
                              const EmbedOptions& options = {});

/// Cosine dissimilarity matrix: dist[i][j] = 1 - <v_i, v_j>, diagonal forced
/// to exact zero, mirrored so symmetry is exact. Refuses n > 20000.
AffinityMatrix affinity(const EmbeddingMatrix& embeddings);

// Cache file: JSONL {"surface","vector"}.
void write_vector_cache(const std::filesystem::path& path, const EmbeddingMatrix& embeddings);
EmbeddingMatrix read_vector_cache(const std::filesystem::path& path);

// Raw binary: "FECLV1", u32 n, u32 dim, then n*dim little-endian f32.
void write_vectors_binary(const std::filesystem::path& path, const EmbeddingMatrix& embeddings);
EmbeddingMatrix read_vectors_binary(const std::filesystem::path& path);

}  // namespace feclust::embed
