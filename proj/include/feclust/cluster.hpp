#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "feclust/embed.hpp"

namespace feclust::cluster {

struct Merge {
  int left = 0;   // child id, left < right
  int right = 0;
  double height = 0.0;  // cophenetic distance
  int size = 0;         // leaves under the merged node
};

/// Agglomerative merge tree: leaf ids 0..n-1, merge i creates id n+i.
struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;  // exactly n-1, heights non-decreasing
};

enum class Linkage { average, single, complete, ward };

Linkage linkage_from_string(std::string_view s);
std::string_view to_string(Linkage l);

/// UPGMA agglomeration over a dissimilarity matrix. Equal-distance ties go
/// to the lexicographically smallest (left_id, right_id) pair.
Dendrogram average_linkage(const embed::AffinityMatrix& affinity);

/// Connected components after applying every merge with height < t.
/// Cluster ids are assigned by smallest contained leaf index, ascending.
std::vector<int> cut(const Dendrogram& dendrogram, double threshold);

int cluster_count(const std::vector<int>& assignment);

struct SilhouetteStats {
  double mean = 0.0;
  double stddev = 0.0;  // population std-dev of per-sample values
};

/// Mean silhouette under cosine dissimilarity. Throws UndefinedMetricError
/// unless 2 <= k <= n-1. Samples in singleton clusters score 0, as does the
/// a=b=0 degenerate case.
double silhouette_score(const embed::EmbeddingMatrix& embeddings, const std::vector<int>& assignment);
SilhouetteStats silhouette_stats(const embed::EmbeddingMatrix& embeddings,
                                 const std::vector<int>& assignment);
SilhouetteStats silhouette_stats_from_dist(const embed::AffinityMatrix& dist,
                                           const std::vector<int>& assignment);

struct DaviesBouldinDiagnostics {
  std::vector<std::pair<int, int>> coincident_centroid_pairs;
};

/// Davies-Bouldin index on Euclidean geometry over the (unit) embedding rows;
/// centroids are plain arithmetic means. Coincident centroids make the pair
/// ratio +inf and are listed in the diagnostics.
double davies_bouldin(const embed::EmbeddingMatrix& embeddings, const std::vector<int>& assignment,
                      DaviesBouldinDiagnostics* diagnostics = nullptr);

/// 0.5*(sil+1)/2 + 0.3/(1+db) + 0.2*(1 - k/n): increasing in silhouette,
/// decreasing in Davies-Bouldin and in cluster count.
double composite_score(double silhouette, double davies_bouldin, int k, std::size_t n);

struct ClusteringCandidate {
  double threshold = 0.0;
  std::vector<int> assignment;
  int k = 0;
  double silhouette = 0.0;
  double silhouette_std = 0.0;
  double davies_bouldin = 0.0;
  double composite = 0.0;
  bool valid = false;  // 2 <= k <= n-1, metrics defined
};

struct SweepConfig {
  Linkage linkage = Linkage::average;
  double start = 0.10;
  double stop = 0.90;
  double step = 0.05;
};

std::vector<double> sweep_thresholds(const SweepConfig& config);

/// Evaluates every threshold on the grid. Invalid cuts are kept with
/// valid=false and no metrics. Throws when no threshold yields a valid
/// clustering, advising a sweep-range override.
std::vector<ClusteringCandidate> sweep(const embed::EmbeddingMatrix& embeddings,
                                       const Dendrogram& dendrogram, const SweepConfig& config,
                                       const embed::AffinityMatrix* precomputed = nullptr);

nlohmann::json dendrogram_to_json(const Dendrogram& dendrogram);
Dendrogram dendrogram_from_json(const nlohmann::json& j);

nlohmann::json candidates_to_json(const std::vector<ClusteringCandidate>& candidates);

}  // namespace feclust::cluster
