#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "feclust/cluster.hpp"
#include "feclust/corpus.hpp"
#include "feclust/embed.hpp"
#include "feclust/eval.hpp"
#include "feclust/select.hpp"
#include "feclust/taxonomy.hpp"

namespace feclust::pipeline {

struct EmbeddingSpec {
  std::string mode = "hashing";  // hashing | remote
  std::string endpoint;
  std::string model;
  std::size_t dimension = 256;  // hashing provider; remote reports its own
  std::filesystem::path cache_path;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  int retries = 3;
  int backoff_ms = 200;
};

struct ExtractorSpec {
  std::string endpoint;
  std::string source = "syntactic";  // tag applied to fetched features
  std::size_t batch_size = 32;
  int retries = 3;
  int backoff_ms = 200;
};

struct TaxonomySpec {
  double sigma = 0.75;
  std::size_t min_subtree_size = 4;
  double structural_weight = 0.0;  // reserved; only 0 is implemented
};

struct EvalSpec {
  double beta = 2.385;
  std::vector<int> n_slack = {0, 1, 2};
};

struct PipelineConfig {
  std::filesystem::path reviews_path;
  std::vector<std::filesystem::path> features_paths;
  std::vector<ExtractorSpec> extractors;  // remote extraction, skipped offline
  std::filesystem::path gold_path;        // empty = no extraction eval

  std::size_t sample_size = 0;  // 0 = use the whole corpus
  corpus::DedupScope dedup_scope = corpus::DedupScope::corpus_global;

  EmbeddingSpec embedding;
  cluster::SweepConfig clustering;
  select::SelectionConfig selection;
  taxonomy::LabelerConfig labeler;
  TaxonomySpec taxonomy;
  EvalSpec eval;

  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "out";
  bool offline = false;

  /// Throws on invariant violations; checks that input paths resolve.
  void validate() const;
  /// Applies --offline coercions (hashing embedder + stub labeler).
  void apply_offline();
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config_file(const std::filesystem::path& path);

/// Generic app-domain labeling examples, used when a remote-labeler config
/// does not supply its own.
std::vector<taxonomy::FewShotExample> default_few_shot_examples();

std::unique_ptr<embed::EmbeddingProvider> make_provider(const PipelineConfig& config);
embed::EmbedOptions embed_options(const PipelineConfig& config);

// ---- Stage functions (file-level, resumable) --------------------------------

struct StageIO {
  std::filesystem::path reviews_clean;
  std::filesystem::path reviews_sampled;
  std::filesystem::path features;
  std::filesystem::path embeddings;
  std::filesystem::path dendrogram;
  std::filesystem::path candidates;
  std::filesystem::path selection;
  std::filesystem::path taxonomies;
  std::filesystem::path taxonomies_merged;
  std::filesystem::path taxonomies_dot;
  std::filesystem::path nodes_csv;
  std::filesystem::path edges_csv;
  std::filesystem::path eval_json;
  std::filesystem::path eval_text;
  std::filesystem::path report_json;
  std::filesystem::path report_text;
  std::filesystem::path manifest;

  static StageIO in_directory(const std::filesystem::path& dir);
};

corpus::IngestStats stage_ingest(const std::filesystem::path& reviews_in,
                                 const std::filesystem::path& reviews_out);
void stage_sample(const std::filesystem::path& reviews_in, std::size_t size, std::uint64_t seed,
                  const std::filesystem::path& reviews_out);
/// Loads/normalizes each feature file, fetches from every configured
/// extractor endpoint (non-offline runs), and hybrid-merges everything left
/// to right. With `restrict_to_reviews`, file features are filtered to the
/// review ids found in `reviews_source`; extraction always runs over
/// `reviews_source`.
void stage_extract_merge(const PipelineConfig& config,
                         const std::filesystem::path& reviews_source, bool restrict_to_reviews,
                         const std::filesystem::path& features_out);
void stage_embed(const PipelineConfig& config, const std::filesystem::path& features_in,
                 const std::filesystem::path& embeddings_out);
void stage_cluster(const PipelineConfig& config, const std::filesystem::path& features_in,
                   const std::filesystem::path& embeddings_in,
                   const std::filesystem::path& dendrogram_out,
                   const std::filesystem::path& candidates_out);
void stage_select(const PipelineConfig& config, const std::filesystem::path& candidates_in,
                  const std::filesystem::path& dendrogram_in,
                  const std::filesystem::path& selection_out);
void stage_tag(const PipelineConfig& config, const std::filesystem::path& features_in,
               const std::filesystem::path& dendrogram_in,
               const std::filesystem::path& selection_in,
               const std::filesystem::path& taxonomies_out);
void stage_merge(const PipelineConfig& config, const std::filesystem::path& taxonomies_in,
                 const std::filesystem::path& taxonomies_out);
void stage_eval(const PipelineConfig& config, const std::filesystem::path& eval_json_out,
                const std::filesystem::path& eval_text_out);
void stage_report(const PipelineConfig& config, const StageIO& io);
void stage_export(const std::filesystem::path& taxonomies_in,
                  const std::filesystem::path& dot_out, const std::filesystem::path& nodes_out,
                  const std::filesystem::path& edges_out);

// ---- Helpers shared by stages and the CLI ------------------------------------

/// Loads an embedding matrix from the cache-format JSONL and aligns rows to
/// the FeatureSet order; every feature surface must be present.
embed::EmbeddingMatrix load_aligned_embeddings(const std::filesystem::path& embeddings_path,
                                               const corpus::FeatureSet& features);

/// Restores the candidate list (with assignments) from candidates.json plus
/// the dendrogram.
std::vector<cluster::ClusteringCandidate> load_candidates(
    const std::filesystem::path& candidates_path, const std::filesystem::path& dendrogram_path);

/// Full Stage 1 -> 2 -> 3 -> eval run. Writes every artifact plus
/// manifest.json; returns the manifest.
nlohmann::json run_pipeline(const PipelineConfig& config);

}  // namespace feclust::pipeline
