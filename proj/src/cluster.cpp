#include "feclust/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "feclust/util.hpp"

namespace feclust::cluster {

namespace {

struct PairKey {
  double d;
  int a;  // a < b, dendrogram ids
  int b;

  bool operator<(const PairKey& o) const {
    if (d != o.d) return d < o.d;
    if (a != o.a) return a < o.a;
    return b < o.b;
  }
};

PairKey make_key(double d, int x, int y) {
  return x < y ? PairKey{d, x, y} : PairKey{d, y, x};
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int x, int y) { parent[find(x)] = find(y); }
};

}  // namespace

Linkage linkage_from_string(std::string_view s) {
  if (s == "average") return Linkage::average;
  if (s == "single") return Linkage::single;
  if (s == "complete") return Linkage::complete;
  if (s == "ward") return Linkage::ward;
  throw std::invalid_argument("unknown linkage: " + std::string(s));
}

std::string_view to_string(Linkage l) {
  switch (l) {
    case Linkage::average: return "average";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::ward: return "ward";
  }
  return "average";
}

Dendrogram average_linkage(const embed::AffinityMatrix& affinity) {
  const std::size_t n = affinity.n;
  if (n < 2) {
    throw std::invalid_argument("average_linkage needs at least 2 points");
  }

  // Slot-compacted UPGMA with a per-row nearest-partner cache. Every merge
  // takes the globally smallest (distance, left_id, right_id) pair, so the
  // cache is only a scan saver, never a tie-break change.
  std::vector<double> dist = affinity.dist;  // mutated in place, n x n by slot
  std::vector<int> slot_id(n);
  std::iota(slot_id.begin(), slot_id.end(), 0);
  std::vector<int> size(n, 1);
  std::vector<char> active(n, 1);
  std::vector<int> best_partner(n, -1);  // partner id, -1 = rescan needed
  std::vector<double> best_dist(n, 0.0);
  std::vector<int> id_slot(2 * n - 1, -1);
  for (std::size_t s = 0; s < n; ++s) id_slot[s] = static_cast<int>(s);

  const auto rescan_row = [&](std::size_t s) {
    best_partner[s] = -1;
    PairKey best{std::numeric_limits<double>::infinity(), 0, 0};
    for (std::size_t t = 0; t < n; ++t) {
      if (t == s || !active[t]) continue;
      PairKey key = make_key(dist[s * n + t], slot_id[s], slot_id[t]);
      if (key < best) {
        best = key;
        best_partner[s] = slot_id[t];
        best_dist[s] = key.d;
      }
    }
  };

  Dendrogram out;
  out.n_leaves = n;
  out.merges.reserve(n - 1);

  for (std::size_t s = 0; s < n; ++s) rescan_row(s);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    PairKey best{std::numeric_limits<double>::infinity(), 0, 0};
    for (std::size_t s = 0; s < n; ++s) {
      if (!active[s]) continue;
      if (best_partner[s] < 0 || id_slot[static_cast<std::size_t>(best_partner[s])] < 0) {
        rescan_row(s);
      }
      if (best_partner[s] < 0) continue;
      PairKey key = make_key(best_dist[s], slot_id[s], best_partner[s]);
      if (key < best) {
        best = key;
      }
    }

    const int new_id = static_cast<int>(n + step);
    const std::size_t u = static_cast<std::size_t>(id_slot[static_cast<std::size_t>(best.a)]);
    const std::size_t v = static_cast<std::size_t>(id_slot[static_cast<std::size_t>(best.b)]);
    out.merges.push_back(Merge{best.a, best.b, best.d, size[u] + size[v]});

    const double wu = size[u];
    const double wv = size[v];
    id_slot[static_cast<std::size_t>(best.a)] = -1;
    id_slot[static_cast<std::size_t>(best.b)] = -1;
    active[v] = 0;
    slot_id[u] = new_id;
    id_slot[static_cast<std::size_t>(new_id)] = static_cast<int>(u);
    size[u] += size[v];

    for (std::size_t t = 0; t < n; ++t) {
      if (!active[t] || t == u) continue;
      const double d_new = (wu * dist[u * n + t] + wv * dist[v * n + t]) / (wu + wv);
      dist[u * n + t] = d_new;
      dist[t * n + u] = d_new;
      // The new cluster may displace t's cached partner.
      if (best_partner[t] >= 0 && id_slot[static_cast<std::size_t>(best_partner[t])] >= 0) {
        PairKey cur = make_key(best_dist[t], slot_id[t], best_partner[t]);
        PairKey cand = make_key(d_new, slot_id[t], new_id);
        if (cand < cur) {
          best_partner[t] = new_id;
          best_dist[t] = d_new;
        }
      }
    }
    rescan_row(u);
  }
  return out;
}

std::vector<int> cut(const Dendrogram& dendrogram, double threshold) {
  const std::size_t n = dendrogram.n_leaves;
  DisjointSet dsu(2 * n - 1);
  for (std::size_t i = 0; i < dendrogram.merges.size(); ++i) {
    const Merge& m = dendrogram.merges[i];
    if (m.height < threshold) {
      const int node = static_cast<int>(n + i);
      dsu.unite(m.left, node);
      dsu.unite(m.right, node);
    }
  }
  std::vector<int> assignment(n, -1);
  std::vector<int> root_to_cluster(2 * n - 1, -1);
  int next = 0;
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    int root = dsu.find(static_cast<int>(leaf));
    if (root_to_cluster[static_cast<std::size_t>(root)] < 0) {
      root_to_cluster[static_cast<std::size_t>(root)] = next++;
    }
    assignment[leaf] = root_to_cluster[static_cast<std::size_t>(root)];
  }
  return assignment;
}

int cluster_count(const std::vector<int>& assignment) {
  int k = 0;
  for (int c : assignment) k = std::max(k, c + 1);
  return k;
}

SilhouetteStats silhouette_stats_from_dist(const embed::AffinityMatrix& dist,
                                           const std::vector<int>& assignment) {
  const std::size_t n = assignment.size();
  const int k = cluster_count(assignment);
  if (k < 2 || static_cast<std::size_t>(k) > n - 1) {
    throw UndefinedMetricError("silhouette undefined for k=" + std::to_string(k) +
                               " with n=" + std::to_string(n));
  }
  std::vector<std::size_t> cluster_size(static_cast<std::size_t>(k), 0);
  for (int c : assignment) ++cluster_size[static_cast<std::size_t>(c)];

  std::vector<double> per_sample(n, 0.0);
  std::vector<double> sum_to_cluster(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum_to_cluster.begin(), sum_to_cluster.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to_cluster[static_cast<std::size_t>(assignment[j])] += dist.at(i, j);
    }
    const std::size_t own = static_cast<std::size_t>(assignment[i]);
    if (cluster_size[own] <= 1) {
      per_sample[i] = 0.0;  // singleton convention
      continue;
    }
    const double a = sum_to_cluster[own] / static_cast<double>(cluster_size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (c == own || cluster_size[c] == 0) continue;
      b = std::min(b, sum_to_cluster[c] / static_cast<double>(cluster_size[c]));
    }
    const double denom = std::max(a, b);
    per_sample[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }

  SilhouetteStats stats;
  for (double s : per_sample) stats.mean += s;
  stats.mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : per_sample) var += (s - stats.mean) * (s - stats.mean);
  stats.stddev = std::sqrt(var / static_cast<double>(n));
  return stats;
}

SilhouetteStats silhouette_stats(const embed::EmbeddingMatrix& embeddings,
                                 const std::vector<int>& assignment) {
  return silhouette_stats_from_dist(embed::affinity(embeddings), assignment);
}

double silhouette_score(const embed::EmbeddingMatrix& embeddings,
                        const std::vector<int>& assignment) {
  return silhouette_stats(embeddings, assignment).mean;
}

double davies_bouldin(const embed::EmbeddingMatrix& embeddings, const std::vector<int>& assignment,
                      DaviesBouldinDiagnostics* diagnostics) {
  const std::size_t n = embeddings.rows();
  const std::size_t dim = embeddings.dim;
  const int k = cluster_count(assignment);
  if (k < 2) {
    throw UndefinedMetricError("davies_bouldin undefined for k=" + std::to_string(k));
  }

  std::vector<double> centroid(static_cast<std::size_t>(k) * dim, 0.0);
  std::vector<std::size_t> cluster_size(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(assignment[i]);
    ++cluster_size[c];
    auto row = embeddings.row(i);
    for (std::size_t d = 0; d < dim; ++d) centroid[c * dim + d] += row[d];
  }
  for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
    for (std::size_t d = 0; d < dim; ++d) {
      centroid[c * dim + d] /= static_cast<double>(cluster_size[c]);
    }
  }

  std::vector<double> dispersion(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(assignment[i]);
    auto row = embeddings.row(i);
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double delta = row[d] - centroid[c * dim + d];
      sq += delta * delta;
    }
    dispersion[c] += std::sqrt(sq);
  }
  for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
    dispersion[c] /= static_cast<double>(cluster_size[c]);
  }

  double db = 0.0;
  for (int i = 0; i < k; ++i) {
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double delta = centroid[static_cast<std::size_t>(i) * dim + d] -
                             centroid[static_cast<std::size_t>(j) * dim + d];
        sq += delta * delta;
      }
      const double m = std::sqrt(sq);
      double ratio;
      if (m < 1e-12) {
        ratio = std::numeric_limits<double>::infinity();
        if (diagnostics && i < j) {
          diagnostics->coincident_centroid_pairs.emplace_back(i, j);
        }
      } else {
        ratio = (dispersion[static_cast<std::size_t>(i)] +
                 dispersion[static_cast<std::size_t>(j)]) / m;
      }
      worst = std::max(worst, ratio);
    }
    db += worst;
  }
  return db / static_cast<double>(k);
}

double composite_score(double silhouette, double davies_bouldin, int k, std::size_t n) {
  return 0.5 * (silhouette + 1.0) / 2.0 + 0.3 * (1.0 / (1.0 + davies_bouldin)) +
         0.2 * (1.0 - static_cast<double>(k) / static_cast<double>(n));
}

std::vector<double> sweep_thresholds(const SweepConfig& config) {
  if (!(config.start < config.stop) || !(config.step > 0.0)) {
    throw std::invalid_argument("sweep needs start < stop and step > 0");
  }
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double t = config.start + static_cast<double>(i) * config.step;
    if (t > config.stop + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

std::vector<ClusteringCandidate> sweep(const embed::EmbeddingMatrix& embeddings,
                                       const Dendrogram& dendrogram, const SweepConfig& config,
                                       const embed::AffinityMatrix* precomputed) {
  if (config.linkage != Linkage::average) {
    throw PipelineError("only average linkage is implemented");
  }
  embed::AffinityMatrix local;
  if (!precomputed) {
    local = embed::affinity(embeddings);
    precomputed = &local;
  }
  const std::size_t n = dendrogram.n_leaves;
  std::vector<ClusteringCandidate> out;
  bool any_valid = false;
  for (double t : sweep_thresholds(config)) {
    ClusteringCandidate cand;
    cand.threshold = t;
    cand.assignment = cut(dendrogram, t);
    cand.k = cluster_count(cand.assignment);
    cand.valid = cand.k >= 2 && static_cast<std::size_t>(cand.k) <= n - 1;
    if (cand.valid) {
      any_valid = true;
      SilhouetteStats sil = silhouette_stats_from_dist(*precomputed, cand.assignment);
      cand.silhouette = sil.mean;
      cand.silhouette_std = sil.stddev;
      cand.davies_bouldin = davies_bouldin(embeddings, cand.assignment);
      cand.composite = composite_score(cand.silhouette, cand.davies_bouldin, cand.k, n);
    }
    out.push_back(std::move(cand));
  }
  if (!any_valid) {
    throw PipelineError(
        "no threshold in [" + std::to_string(config.start) + ", " + std::to_string(config.stop) +
        "] produced a valid clustering (2 <= k <= n-1); override the sweep range");
  }
  return out;
}

nlohmann::json dendrogram_to_json(const Dendrogram& dendrogram) {
  nlohmann::json j;
  j["n_leaves"] = dendrogram.n_leaves;
  j["merges"] = nlohmann::json::array();
  for (const auto& m : dendrogram.merges) {
    j["merges"].push_back({m.left, m.right, m.height, m.size});
  }
  return j;
}

Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram d;
  d.n_leaves = j.at("n_leaves").get<std::size_t>();
  for (const auto& row : j.at("merges")) {
    d.merges.push_back(Merge{row.at(0).get<int>(), row.at(1).get<int>(),
                             row.at(2).get<double>(), row.at(3).get<int>()});
  }
  if (d.merges.size() + 1 != d.n_leaves) {
    throw PipelineError("dendrogram JSON has " + std::to_string(d.merges.size()) +
                        " merges for " + std::to_string(d.n_leaves) + " leaves");
  }
  return d;
}

nlohmann::json candidates_to_json(const std::vector<ClusteringCandidate>& candidates) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : candidates) {
    nlohmann::json j;
    j["threshold"] = c.threshold;
    j["k"] = c.k;
    j["valid"] = c.valid;
    if (c.valid) {
      j["silhouette"] = c.silhouette;
      j["silhouette_std"] = c.silhouette_std;
      j["davies_bouldin"] =
          std::isfinite(c.davies_bouldin) ? nlohmann::json(c.davies_bouldin) : nlohmann::json();
      j["composite"] = c.composite;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace feclust::cluster
