#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "feclust/cluster.hpp"
#include "feclust/embed.hpp"
#include "feclust/remote.hpp"

namespace feclust::taxonomy {

enum class NodeKind { root, internal, leaf };

std::string_view to_string(NodeKind k);
NodeKind node_kind_from_string(std::string_view s);

struct TaxonomyNode {
  std::string node_id;
  std::string label;
  NodeKind kind = NodeKind::leaf;
  std::optional<std::string> feature;  // present iff leaf
  std::vector<TaxonomyNode> children;

  std::size_t leaf_count() const;
  std::size_t depth() const;  // root alone = 1, root->leaf = 2
  void collect_leaf_surfaces(std::vector<std::string>& out) const;
};

struct Taxonomy {
  TaxonomyNode root;
  std::vector<double> root_label_embedding;  // unit vector
  std::vector<int> provenance;               // cluster ids merged in

  std::size_t leaves() const { return root.leaf_count(); }
  std::size_t depth() const { return root.depth(); }
};

// ---- Labeling ---------------------------------------------------------------

struct FewShotExample {
  std::vector<std::string> features;
  std::string label;
};

enum class LabelerMode { remote_llm, deterministic_stub };

struct LabelerConfig {
  LabelerMode mode = LabelerMode::deterministic_stub;
  std::string endpoint;
  std::string model;
  std::string prompt_template =
      "Name this group of mobile-app features with a 1-4 word category: {features}";
  std::vector<FewShotExample> few_shot_examples;
  int max_label_tokens = 6;
  double temperature = 0.0;
  remote::RetryPolicy retry;
  std::optional<std::string> api_key;  // filled from FECLUST_LLM_API_KEY
};

class Labeler {
 public:
  virtual ~Labeler() = default;
  virtual std::string tag() const = 0;
  virtual std::string label(const std::vector<std::string>& member_surfaces) = 0;
  /// True when the last call fell back to the stub (remote failure).
  virtual bool last_call_degraded() const { return false; }
};

/// Two highest-frequency content tokens of the member surfaces, joined by a
/// space. Pure function of the members.
class StubLabeler final : public Labeler {
 public:
  std::string tag() const override { return "stub-top2"; }
  std::string label(const std::vector<std::string>& member_surfaces) override;
};

std::string stub_label(const std::vector<std::string>& member_surfaces);

/// Chat-completion client. Falls back to the stub label (and sets the
/// degraded flag) when the endpoint fails after retries or returns an empty
/// label.
class RemoteLabeler final : public Labeler {
 public:
  explicit RemoteLabeler(LabelerConfig config);
  std::string tag() const override { return "remote:" + config_.model; }
  std::string label(const std::vector<std::string>& member_surfaces) override;
  bool last_call_degraded() const override { return degraded_; }

  nlohmann::json build_messages(const std::vector<std::string>& member_surfaces) const;

 private:
  LabelerConfig config_;
  bool degraded_ = false;
};

std::unique_ptr<Labeler> make_labeler(const LabelerConfig& config);

// ---- Construction ------------------------------------------------------------

struct HierarchyConfig {
  std::size_t min_subtree_size = 4;
};

/// Restricts the dendrogram to the member leaves, collapses unary
/// pass-throughs, and flattens internal nodes with fewer than
/// min_subtree_size leaves into their parent. Leaves carry the feature
/// surfaces; `id_prefix` seeds the node ids.
TaxonomyNode build_hierarchy(const std::vector<std::size_t>& members,
                             const cluster::Dendrogram& dendrogram,
                             const std::vector<std::string>& surfaces,
                             const HierarchyConfig& config = {},
                             const std::string& id_prefix = "n");

/// Labels every internal node: nodes with >= min_subtree_size leaves go
/// through the labeler, smaller ones get the stub. The root is left alone
/// (it already carries the cluster label).
void label_internal_nodes(TaxonomyNode& root, Labeler& labeler, const HierarchyConfig& config = {});

/// One mini-taxonomy per cluster of the assignment: BuildHierarchy + cluster
/// label at the root + internal-node labels + root-label embedding.
std::vector<Taxonomy> build_taxonomies(const std::vector<int>& assignment,
                                       const cluster::Dendrogram& dendrogram,
                                       const std::vector<std::string>& surfaces, Labeler& labeler,
                                       embed::EmbeddingProvider& provider,
                                       const HierarchyConfig& config = {});

// ---- Merging ------------------------------------------------------------------

struct MergeRecord {
  std::string larger_label;
  std::string smaller_label;
  double similarity = 0.0;
};

/// Single-pass greedy merge: all root-label pairs scored once by cosine
/// similarity (bit-identical embeddings score exactly 1), pairs >= sigma
/// processed in descending similarity, each merge attaching the smaller root
/// under the larger; consumed taxonomies are skipped and no new pairs are
/// scored.
std::vector<Taxonomy> merge_taxonomies(std::vector<Taxonomy> taxonomies, double sigma,
                                       std::vector<MergeRecord>* records = nullptr);

/// Mean cosine similarity between the root-label embedding and the member
/// feature embeddings (looked up in E by surface).
double coherence_score(const Taxonomy& taxonomy, const embed::EmbeddingMatrix& embeddings);

// ---- Statistics ----------------------------------------------------------------

struct TaxonomyStats {
  std::vector<std::size_t> depths;
  std::vector<std::size_t> leaf_counts;
  double mean_depth = 0.0;
  double mean_leaves = 0.0;
  std::size_t min_depth = 0, max_depth = 0;
  std::size_t min_leaves = 0, max_leaves = 0;
  std::size_t empty_count = 0;
};

TaxonomyStats taxonomy_stats(const std::vector<Taxonomy>& taxonomies);

// ---- Serialization ---------------------------------------------------------------

nlohmann::json node_to_json(const TaxonomyNode& node);
TaxonomyNode node_from_json(const nlohmann::json& j);

nlohmann::json taxonomies_to_json(const std::vector<Taxonomy>& taxonomies);
std::vector<Taxonomy> taxonomies_from_json(const nlohmann::json& j);

/// One digraph per taxonomy; internal nodes boxed, leaves oval, edges
/// parent->child.
std::string taxonomies_to_dot(const std::vector<Taxonomy>& taxonomies);

/// nodes.csv: node_id,label,kind,taxonomy_id / edges.csv: parent_id,child_id
void taxonomies_to_csv(const std::vector<Taxonomy>& taxonomies, std::string& nodes_csv,
                       std::string& edges_csv);

}  // namespace feclust::taxonomy
