#include "feclust/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "feclust/text.hpp"
#include "feclust/util.hpp"

namespace feclust::taxonomy {

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a", "an", "the", "of", "to", "and", "or", "for", "in",
      "on", "with", "at", "by", "from", "is", "are", "be", "it",
  };
  return words;
}

bool is_punct_only(const std::string& token) {
  std::size_t pos = 0;
  while (pos < token.size()) {
    if (!text::is_punctuation(text::decode_utf8(token, pos))) return false;
  }
  return !token.empty();
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string render_template(std::string templ, const std::string& features) {
  const std::string slot = "{features}";
  auto pos = templ.find(slot);
  if (pos == std::string::npos) {
    return templ + " " + features;
  }
  while (pos != std::string::npos) {
    templ.replace(pos, slot.size(), features);
    pos = templ.find(slot, pos + features.size());
  }
  return templ;
}

std::string trim_label(std::string raw, int max_tokens) {
  std::string lowered = text::lowercase(raw);
  // collapse whitespace so token counting is well defined
  std::string collapsed;
  bool pending = false;
  for (char c : lowered) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending = !collapsed.empty();
      continue;
    }
    if (pending) collapsed.push_back(' ');
    pending = false;
    collapsed.push_back(c);
  }
  auto tokens = text::tokenize(collapsed);
  if (static_cast<int>(tokens.size()) > max_tokens) {
    tokens.resize(static_cast<std::size_t>(max_tokens));
  }
  return join(tokens, " ");
}

void assign_node_ids(TaxonomyNode& node, const std::string& prefix, std::size_t& counter) {
  node.node_id = prefix + std::to_string(counter++);
  for (auto& child : node.children) assign_node_ids(child, prefix, counter);
}

void flatten_small_subtrees(TaxonomyNode& node, std::size_t min_subtree_size) {
  for (auto& child : node.children) flatten_small_subtrees(child, min_subtree_size);
  std::vector<TaxonomyNode> next;
  next.reserve(node.children.size());
  for (auto& child : node.children) {
    if (child.kind == NodeKind::internal && child.leaf_count() < min_subtree_size) {
      for (auto& grandchild : child.children) next.push_back(std::move(grandchild));
    } else {
      next.push_back(std::move(child));
    }
  }
  node.children = std::move(next);
}

double clamped_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("label embeddings have mismatched dimensions");
  }
  if (a == b) return 1.0;  // bit-identical embeddings merge even at sigma=1
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string dot_escape(const std::string& value) {
  std::string out;
  for (char c : value) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::root: return "root";
    case NodeKind::internal: return "internal";
    case NodeKind::leaf: return "leaf";
  }
  return "leaf";
}

NodeKind node_kind_from_string(std::string_view s) {
  if (s == "root") return NodeKind::root;
  if (s == "internal") return NodeKind::internal;
  if (s == "leaf") return NodeKind::leaf;
  throw std::invalid_argument("unknown node kind: " + std::string(s));
}

std::size_t TaxonomyNode::leaf_count() const {
  if (kind == NodeKind::leaf) return 1;
  std::size_t total = 0;
  for (const auto& child : children) total += child.leaf_count();
  return total;
}

std::size_t TaxonomyNode::depth() const {
  std::size_t deepest = 0;
  for (const auto& child : children) deepest = std::max(deepest, child.depth());
  return 1 + deepest;
}

void TaxonomyNode::collect_leaf_surfaces(std::vector<std::string>& out) const {
  if (kind == NodeKind::leaf) {
    out.push_back(feature.value_or(label));
    return;
  }
  for (const auto& child : children) child.collect_leaf_surfaces(out);
}

std::string stub_label(const std::vector<std::string>& member_surfaces) {
  std::map<std::string, int> counts;
  for (const auto& surface : member_surfaces) {
    for (const auto& token : text::tokenize(surface)) {
      if (is_punct_only(token)) continue;
      ++counts[token];
    }
  }
  // frequency desc, then lexicographic; stopwords only as a last resort
  std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> picked;
  for (const auto& [token, freq] : ranked) {
    (void)freq;
    if (stopwords().count(token)) continue;
    picked.push_back(token);
    if (picked.size() == 2) break;
  }
  if (picked.empty()) {
    for (const auto& [token, freq] : ranked) {
      (void)freq;
      picked.push_back(token);
      if (picked.size() == 2) break;
    }
  }
  if (picked.empty()) return "cluster";
  return join(picked, " ");
}

std::string StubLabeler::label(const std::vector<std::string>& member_surfaces) {
  return stub_label(member_surfaces);
}

RemoteLabeler::RemoteLabeler(LabelerConfig config) : config_(std::move(config)) {
  if (config_.few_shot_examples.empty()) {
    throw std::invalid_argument("remote labeler needs at least one few-shot example");
  }
}

nlohmann::json RemoteLabeler::build_messages(const std::vector<std::string>& member_surfaces) const {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back(
      {{"role", "system"},
       {"content",
        "You name groups of mobile-app features with a category of at most " +
            std::to_string(config_.max_label_tokens) +
            " words. Reply with the category only."}});
  for (const auto& example : config_.few_shot_examples) {
    messages.push_back({{"role", "user"},
                        {"content", render_template(config_.prompt_template,
                                                    join(example.features, ", "))}});
    messages.push_back({{"role", "assistant"}, {"content", example.label}});
  }
  messages.push_back({{"role", "user"},
                      {"content", render_template(config_.prompt_template,
                                                  join(member_surfaces, ", "))}});
  return messages;
}

std::string RemoteLabeler::label(const std::vector<std::string>& member_surfaces) {
  degraded_ = false;
  nlohmann::json payload;
  payload["model"] = config_.model;
  payload["messages"] = build_messages(member_surfaces);
  payload["temperature"] = config_.temperature;

  auto res = remote::post_json(config_.endpoint, payload, config_.retry, config_.api_key);
  if (res.ok && res.body.contains("choices") && res.body.at("choices").is_array() &&
      !res.body.at("choices").empty()) {
    const auto& choice = res.body.at("choices").at(0);
    if (choice.contains("message") && choice.at("message").contains("content")) {
      std::string raw = choice.at("message").at("content").get<std::string>();
      std::string trimmed = trim_label(std::move(raw), config_.max_label_tokens);
      if (!trimmed.empty()) return trimmed;
    }
  }
  degraded_ = true;
  return stub_label(member_surfaces);
}

std::unique_ptr<Labeler> make_labeler(const LabelerConfig& config) {
  if (config.mode == LabelerMode::deterministic_stub) {
    return std::make_unique<StubLabeler>();
  }
  LabelerConfig filled = config;
  if (!filled.api_key) {
    if (const char* key = std::getenv("FECLUST_LLM_API_KEY")) {
      filled.api_key = std::string(key);
    }
  }
  return std::make_unique<RemoteLabeler>(std::move(filled));
}

TaxonomyNode build_hierarchy(const std::vector<std::size_t>& members,
                             const cluster::Dendrogram& dendrogram,
                             const std::vector<std::string>& surfaces,
                             const HierarchyConfig& config, const std::string& id_prefix) {
  if (members.empty()) {
    throw std::invalid_argument("build_hierarchy needs at least one member");
  }
  const std::size_t n = dendrogram.n_leaves;

  // Restrict the dendrogram to the member leaves: merges touching one live
  // side pass through, merges joining two live sides become internal nodes.
  std::map<int, TaxonomyNode> live;
  for (std::size_t m : members) {
    TaxonomyNode leaf;
    leaf.kind = NodeKind::leaf;
    leaf.label = surfaces.at(m);
    leaf.feature = surfaces.at(m);
    live.emplace(static_cast<int>(m), std::move(leaf));
  }
  for (std::size_t i = 0; i < dendrogram.merges.size(); ++i) {
    const auto& m = dendrogram.merges[i];
    const int new_id = static_cast<int>(n + i);
    auto it_left = live.find(m.left);
    auto it_right = live.find(m.right);
    if (it_left != live.end() && it_right != live.end()) {
      TaxonomyNode node;
      node.kind = NodeKind::internal;
      node.children.push_back(std::move(it_left->second));
      node.children.push_back(std::move(it_right->second));
      live.erase(it_left);
      live.erase(it_right);
      live.emplace(new_id, std::move(node));
    } else if (it_left != live.end()) {
      TaxonomyNode node = std::move(it_left->second);
      live.erase(it_left);
      live.emplace(new_id, std::move(node));
    } else if (it_right != live.end()) {
      TaxonomyNode node = std::move(it_right->second);
      live.erase(it_right);
      live.emplace(new_id, std::move(node));
    }
  }
  TaxonomyNode top = std::move(live.begin()->second);

  TaxonomyNode root;
  if (top.kind == NodeKind::leaf) {
    root.kind = NodeKind::root;
    root.children.push_back(std::move(top));
  } else {
    root = std::move(top);
    root.kind = NodeKind::root;
  }

  flatten_small_subtrees(root, config.min_subtree_size);

  // Provisional labels keep the non-empty-label invariant before the labeler
  // pass runs.
  const auto provisional = [](TaxonomyNode& node, auto&& self) -> void {
    if (node.kind == NodeKind::leaf) return;
    std::vector<std::string> leaves;
    node.collect_leaf_surfaces(leaves);
    if (node.label.empty()) node.label = stub_label(leaves);
    for (auto& child : node.children) self(child, self);
  };
  provisional(root, provisional);

  std::size_t counter = 0;
  assign_node_ids(root, id_prefix, counter);
  return root;
}

void label_internal_nodes(TaxonomyNode& root, Labeler& labeler, const HierarchyConfig& config) {
  const auto visit = [&](TaxonomyNode& node, auto&& self) -> void {
    for (auto& child : node.children) {
      if (child.kind == NodeKind::internal) {
        std::vector<std::string> leaves;
        child.collect_leaf_surfaces(leaves);
        child.label = child.leaf_count() >= config.min_subtree_size ? labeler.label(leaves)
                                                                    : stub_label(leaves);
        self(child, self);
      }
    }
  };
  visit(root, visit);
}

std::vector<Taxonomy> build_taxonomies(const std::vector<int>& assignment,
                                       const cluster::Dendrogram& dendrogram,
                                       const std::vector<std::string>& surfaces, Labeler& labeler,
                                       embed::EmbeddingProvider& provider,
                                       const HierarchyConfig& config) {
  const int k = cluster::cluster_count(assignment);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    members[static_cast<std::size_t>(assignment[i])].push_back(i);
  }

  std::vector<Taxonomy> out;
  std::vector<std::string> root_labels;
  for (int c = 0; c < k; ++c) {
    const auto& ms = members[static_cast<std::size_t>(c)];
    std::vector<std::string> member_surfaces;
    member_surfaces.reserve(ms.size());
    for (std::size_t m : ms) member_surfaces.push_back(surfaces.at(m));

    Taxonomy taxonomy;
    taxonomy.root = build_hierarchy(ms, dendrogram, surfaces, config,
                                    "c" + std::to_string(c) + "_n");
    taxonomy.root.label = labeler.label(member_surfaces);
    label_internal_nodes(taxonomy.root, labeler, config);
    taxonomy.provenance = {c};
    root_labels.push_back(taxonomy.root.label);
    out.push_back(std::move(taxonomy));
  }

  embed::EmbeddingMatrix label_vectors = embed::embed_strings(root_labels, provider);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = label_vectors.row(i);
    out[i].root_label_embedding.assign(row.begin(), row.end());
  }
  return out;
}

std::vector<Taxonomy> merge_taxonomies(std::vector<Taxonomy> taxonomies, double sigma,
                                       std::vector<MergeRecord>* records) {
  struct ScoredPair {
    double similarity;
    std::size_t i, j;
    std::size_t max_leaves;
    std::string label_lo, label_hi;
  };
  std::vector<ScoredPair> pairs;
  for (std::size_t i = 0; i < taxonomies.size(); ++i) {
    for (std::size_t j = i + 1; j < taxonomies.size(); ++j) {
      const double sim = clamped_cosine(taxonomies[i].root_label_embedding,
                                        taxonomies[j].root_label_embedding);
      if (sim < sigma) continue;
      ScoredPair p;
      p.similarity = sim;
      p.i = i;
      p.j = j;
      p.max_leaves = std::max(taxonomies[i].leaves(), taxonomies[j].leaves());
      p.label_lo = std::min(taxonomies[i].root.label, taxonomies[j].root.label);
      p.label_hi = std::max(taxonomies[i].root.label, taxonomies[j].root.label);
      pairs.push_back(std::move(p));
    }
  }
  // Descending similarity; ties favor the pair touching the larger taxonomy,
  // then sort lexicographically on the label pair for determinism.
  std::stable_sort(pairs.begin(), pairs.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.max_leaves != b.max_leaves) return a.max_leaves > b.max_leaves;
    if (a.label_lo != b.label_lo) return a.label_lo < b.label_lo;
    return a.label_hi < b.label_hi;
  });

  std::vector<char> consumed(taxonomies.size(), 0);
  for (const auto& pair : pairs) {
    if (consumed[pair.i] || consumed[pair.j]) continue;
    Taxonomy& a = taxonomies[pair.i];
    Taxonomy& b = taxonomies[pair.j];

    // larger = more leaves; ties by deeper, then lexicographic root label
    bool a_larger;
    if (a.leaves() != b.leaves()) {
      a_larger = a.leaves() > b.leaves();
    } else if (a.depth() != b.depth()) {
      a_larger = a.depth() > b.depth();
    } else {
      a_larger = a.root.label <= b.root.label;
    }
    Taxonomy& larger = a_larger ? a : b;
    Taxonomy& smaller = a_larger ? b : a;

    if (records) {
      records->push_back(MergeRecord{larger.root.label, smaller.root.label, pair.similarity});
    }
    smaller.root.kind = NodeKind::internal;
    larger.root.children.push_back(std::move(smaller.root));
    larger.provenance.insert(larger.provenance.end(), smaller.provenance.begin(),
                             smaller.provenance.end());
    consumed[a_larger ? pair.j : pair.i] = 1;
  }

  std::vector<Taxonomy> out;
  for (std::size_t i = 0; i < taxonomies.size(); ++i) {
    if (!consumed[i]) out.push_back(std::move(taxonomies[i]));
  }
  return out;
}

double coherence_score(const Taxonomy& taxonomy, const embed::EmbeddingMatrix& embeddings) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < embeddings.rows(); ++i) index.emplace(embeddings.ids[i], i);

  std::vector<std::string> leaves;
  taxonomy.root.collect_leaf_surfaces(leaves);
  if (leaves.empty()) {
    throw std::invalid_argument("taxonomy has no leaves");
  }
  if (taxonomy.root_label_embedding.size() != embeddings.dim) {
    throw std::invalid_argument("label embedding dimension differs from feature embeddings");
  }
  double total = 0.0;
  for (const auto& surface : leaves) {
    auto it = index.find(surface);
    if (it == index.end()) {
      throw PipelineError("feature '" + surface + "' missing from the embedding matrix");
    }
    auto row = embeddings.row(it->second);
    double dot = 0.0;
    for (std::size_t d = 0; d < embeddings.dim; ++d) {
      dot += row[d] * taxonomy.root_label_embedding[d];
    }
    total += std::clamp(dot, -1.0, 1.0);
  }
  return total / static_cast<double>(leaves.size());
}

TaxonomyStats taxonomy_stats(const std::vector<Taxonomy>& taxonomies) {
  if (taxonomies.empty()) {
    throw std::invalid_argument("taxonomy_stats needs a non-empty list");
  }
  TaxonomyStats stats;
  for (const auto& t : taxonomies) {
    stats.depths.push_back(t.depth());
    stats.leaf_counts.push_back(t.leaves());
    if (t.leaves() == 0) ++stats.empty_count;
  }
  stats.min_depth = *std::min_element(stats.depths.begin(), stats.depths.end());
  stats.max_depth = *std::max_element(stats.depths.begin(), stats.depths.end());
  stats.min_leaves = *std::min_element(stats.leaf_counts.begin(), stats.leaf_counts.end());
  stats.max_leaves = *std::max_element(stats.leaf_counts.begin(), stats.leaf_counts.end());
  for (std::size_t d : stats.depths) stats.mean_depth += static_cast<double>(d);
  for (std::size_t l : stats.leaf_counts) stats.mean_leaves += static_cast<double>(l);
  stats.mean_depth /= static_cast<double>(taxonomies.size());
  stats.mean_leaves /= static_cast<double>(taxonomies.size());
  return stats;
}

nlohmann::json node_to_json(const TaxonomyNode& node) {
  nlohmann::json j;
  j["label"] = node.label;
  j["kind"] = std::string(to_string(node.kind));
  if (node.kind == NodeKind::leaf) {
    j["feature"] = node.feature.value_or(node.label);
  }
  j["children"] = nlohmann::json::array();
  for (const auto& child : node.children) {
    j["children"].push_back(node_to_json(child));
  }
  return j;
}

TaxonomyNode node_from_json(const nlohmann::json& j) {
  TaxonomyNode node;
  node.label = j.at("label").get<std::string>();
  node.kind = node_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("feature") && !j.at("feature").is_null()) {
    node.feature = j.at("feature").get<std::string>();
  }
  if (j.contains("children")) {
    for (const auto& child : j.at("children")) {
      node.children.push_back(node_from_json(child));
    }
  }
  if (node.kind == NodeKind::leaf && !node.children.empty()) {
    throw PipelineError("leaf node with children in taxonomy JSON");
  }
  return node;
}

nlohmann::json taxonomies_to_json(const std::vector<Taxonomy>& taxonomies) {
  nlohmann::json j;
  j["taxonomies"] = nlohmann::json::array();
  for (const auto& t : taxonomies) {
    nlohmann::json entry;
    entry["provenance"] = t.provenance;
    entry["root"] = node_to_json(t.root);
    j["taxonomies"].push_back(std::move(entry));
  }
  return j;
}

std::vector<Taxonomy> taxonomies_from_json(const nlohmann::json& j) {
  std::vector<Taxonomy> out;
  for (const auto& entry : j.at("taxonomies")) {
    Taxonomy t;
    t.root = node_from_json(entry.at("root"));
    if (entry.contains("provenance")) {
      t.provenance = entry.at("provenance").get<std::vector<int>>();
    }
    std::size_t counter = 0;
    assign_node_ids(t.root, "n", counter);
    out.push_back(std::move(t));
  }
  return out;
}

std::string taxonomies_to_dot(const std::vector<Taxonomy>& taxonomies) {
  std::ostringstream out;
  for (std::size_t ti = 0; ti < taxonomies.size(); ++ti) {
    out << "digraph taxonomy_" << ti << " {\n";
    out << "  rankdir=TB;\n";
    std::size_t counter = 0;
    const auto visit = [&](const TaxonomyNode& node, auto&& self) -> std::string {
      std::string id = "t" + std::to_string(ti) + "_n" + std::to_string(counter++);
      const char* shape = node.kind == NodeKind::leaf ? "oval" : "box";
      out << "  \"" << id << "\" [shape=" << shape << ", label=\"" << dot_escape(node.label)
          << "\"];\n";
      for (const auto& child : node.children) {
        std::string child_id = self(child, self);
        out << "  \"" << id << "\" -> \"" << child_id << "\";\n";
      }
      return id;
    };
    visit(taxonomies[ti].root, visit);
    out << "}\n";
  }
  return out.str();
}

void taxonomies_to_csv(const std::vector<Taxonomy>& taxonomies, std::string& nodes_csv,
                       std::string& edges_csv) {
  std::ostringstream nodes;
  std::ostringstream edges;
  nodes << "node_id,label,kind,taxonomy_id\n";
  edges << "parent_id,child_id\n";
  for (std::size_t ti = 0; ti < taxonomies.size(); ++ti) {
    std::size_t counter = 0;
    const auto visit = [&](const TaxonomyNode& node, auto&& self) -> std::string {
      std::string id = "t" + std::to_string(ti) + "_n" + std::to_string(counter++);
      nodes << id << ',' << csv_field(node.label) << ',' << to_string(node.kind) << ",t" << ti
            << '\n';
      for (const auto& child : node.children) {
        std::string child_id = self(child, self);
        edges << id << ',' << child_id << '\n';
      }
      return id;
    };
    visit(taxonomies[ti].root, visit);
  }
  nodes_csv = nodes.str();
  edges_csv = edges.str();
}

}  // namespace feclust::taxonomy
