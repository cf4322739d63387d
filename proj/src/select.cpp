#include "feclust/select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "feclust/util.hpp"

namespace feclust::select {

Strategy strategy_from_string(std::string_view s) {
  if (s == "silhouette") return Strategy::silhouette;
  if (s == "balanced") return Strategy::balanced;
  if (s == "conservative") return Strategy::conservative;
  throw std::invalid_argument("unknown strategy: " + std::string(s));
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::silhouette: return "silhouette";
    case Strategy::balanced: return "balanced";
    case Strategy::conservative: return "conservative";
  }
  return "balanced";
}

int max_cluster_size(const std::vector<int>& assignment) {
  std::vector<int> counts(static_cast<std::size_t>(cluster::cluster_count(assignment)), 0);
  for (int c : assignment) ++counts[static_cast<std::size_t>(c)];
  int best = 0;
  for (int c : counts) best = std::max(best, c);
  return best;
}

double balanced_score(const cluster::ClusteringCandidate& candidate,
                      const SelectionConfig& config) {
  const double n = static_cast<double>(candidate.assignment.size());
  const double inv_db =
      std::isfinite(candidate.davies_bouldin) ? 1.0 / (1.0 + candidate.davies_bouldin) : 0.0;
  return (candidate.silhouette + 1.0) / 2.0 + inv_db -
         config.alpha * (static_cast<double>(candidate.k) / n) -
         config.gamma * (static_cast<double>(max_cluster_size(candidate.assignment)) / n);
}

SelectionResult select(const std::vector<cluster::ClusteringCandidate>& candidates,
                       const SelectionConfig& config) {
  if (config.size_penalty != SizePenalty::max_size) {
    throw PipelineError("only the max_size cluster-size penalty is implemented");
  }
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].valid) valid.push_back(i);
  }
  if (valid.empty()) {
    throw PipelineError("selection needs at least one valid clustering candidate");
  }

  SelectionResult result;
  result.scores.assign(candidates.size(), 0.0);

  // argmax score; ties -> lower k, then lower threshold
  const auto argmax_then_low_k = [&](auto score_of) {
    std::size_t best = valid[0];
    for (std::size_t i : valid) {
      result.scores[i] = score_of(candidates[i]);
    }
    for (std::size_t i : valid) {
      const double s = result.scores[i];
      const double sb = result.scores[best];
      if (s > sb ||
          (s == sb && (candidates[i].k < candidates[best].k ||
                       (candidates[i].k == candidates[best].k &&
                        candidates[i].threshold < candidates[best].threshold)))) {
        best = i;
      }
    }
    return best;
  };

  std::size_t chosen = valid[0];
  switch (config.strategy) {
    case Strategy::silhouette:
      chosen = argmax_then_low_k([](const cluster::ClusteringCandidate& c) { return c.silhouette; });
      break;
    case Strategy::balanced:
      chosen = argmax_then_low_k(
          [&](const cluster::ClusteringCandidate& c) { return balanced_score(c, config); });
      break;
    case Strategy::conservative: {
      double max_sil = -std::numeric_limits<double>::infinity();
      for (std::size_t i : valid) max_sil = std::max(max_sil, candidates[i].silhouette);
      const double floor = max_sil - config.stability_margin;
      chosen = 0;
      bool have = false;
      for (std::size_t i : valid) {
        result.scores[i] = candidates[i].silhouette;
        if (candidates[i].silhouette < floor) continue;
        if (!have || candidates[i].k < candidates[chosen].k ||
            (candidates[i].k == candidates[chosen].k &&
             candidates[i].threshold > candidates[chosen].threshold)) {
          chosen = i;
          have = true;
        }
      }
      break;
    }
  }

  result.index = chosen;
  result.candidate = candidates[chosen];
  return result;
}

nlohmann::json selection_to_json(const SelectionResult& result,
                                 const std::vector<cluster::ClusteringCandidate>& candidates,
                                 const SelectionConfig& config) {
  nlohmann::json j;
  j["strategy"] = std::string(to_string(config.strategy));
  j["alpha"] = config.alpha;
  j["gamma"] = config.gamma;
  j["stability_margin"] = config.stability_margin;
  j["chosen_index"] = result.index;
  j["chosen_threshold"] = result.candidate.threshold;
  j["chosen_k"] = result.candidate.k;
  j["candidates"] = nlohmann::json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    nlohmann::json c;
    c["threshold"] = candidates[i].threshold;
    c["k"] = candidates[i].k;
    c["valid"] = candidates[i].valid;
    if (candidates[i].valid) {
      c["silhouette"] = candidates[i].silhouette;
      c["strategy_score"] = result.scores[i];
    }
    c["chosen"] = (i == result.index);
    j["candidates"].push_back(std::move(c));
  }
  return j;
}

}  // namespace feclust::select
