#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "feclust/cluster.hpp"

namespace feclust::select {

enum class Strategy { silhouette, balanced, conservative };

Strategy strategy_from_string(std::string_view s);
std::string_view to_string(Strategy s);

enum class SizePenalty { max_size, variance, singleton_count };

struct SelectionConfig {
  Strategy strategy = Strategy::balanced;
  double alpha = 0.25;             // cluster-count penalty weight
  double gamma = 0.25;             // max-cluster-size penalty weight
  double stability_margin = 0.05;  // conservative silhouette margin
  SizePenalty size_penalty = SizePenalty::max_size;
};

struct SelectionResult {
  std::size_t index = 0;  // into the candidate list
  cluster::ClusteringCandidate candidate;
  // Chosen strategy's score for every candidate (valid ones only carry a
  // meaningful value).
  std::vector<double> scores;
};

int max_cluster_size(const std::vector<int>& assignment);

double balanced_score(const cluster::ClusteringCandidate& candidate, const SelectionConfig& config);

/// Picks a valid candidate under the configured strategy:
///   silhouette:   argmax silhouette; ties -> lower k, then lower threshold
///   balanced:     argmax (sil+1)/2 + 1/(1+DB) - alpha*k/n - gamma*max_size/n
///   conservative: among silhouette >= max - margin, argmin k; ties -> higher
///                 threshold
SelectionResult select(const std::vector<cluster::ClusteringCandidate>& candidates,
                       const SelectionConfig& config);

nlohmann::json selection_to_json(const SelectionResult& result,
                                 const std::vector<cluster::ClusteringCandidate>& candidates,
                                 const SelectionConfig& config);

}  // namespace feclust::select
