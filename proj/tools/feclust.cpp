#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feclust/pipeline.hpp"
#include "feclust/util.hpp"

namespace {

using feclust::pipeline::PipelineConfig;

struct ProviderFlags {
  std::optional<std::string> mode;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<std::size_t> dimension;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> cache;

  void attach(CLI::App* cmd) {
    cmd->add_option("--embed-mode", mode, "Embedding provider: hashing or remote");
    cmd->add_option("--embed-endpoint", endpoint, "Remote embedding endpoint URL");
    cmd->add_option("--embed-model", model, "Remote embedding model name");
    cmd->add_option("--dimension", dimension, "Hashing embedder dimension");
    cmd->add_option("--seed", seed, "Seed for the hashing embedder");
    cmd->add_option("--embed-cache", cache, "Vector cache JSONL path");
  }

  void apply(PipelineConfig& cfg) const {
    if (mode) cfg.embedding.mode = *mode;
    if (endpoint) cfg.embedding.endpoint = *endpoint;
    if (model) cfg.embedding.model = *model;
    if (dimension) cfg.embedding.dimension = *dimension;
    if (seed) cfg.seed = *seed;
    if (cache) cfg.embedding.cache_path = *cache;
  }
};

PipelineConfig base_config(const std::optional<std::string>& config_path) {
  if (config_path) {
    return feclust::pipeline::load_config_file(*config_path);
  }
  return PipelineConfig{};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feclust: clusters app-review features into labeled taxonomies"};
  app.require_subcommand(1);

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "Clean review bodies (emoji/URL removal)");
  std::string ingest_reviews, ingest_out;
  ingest->add_option("--reviews", ingest_reviews, "Reviews JSONL")->required();
  ingest->add_option("--out", ingest_out, "Cleaned reviews JSONL")->required();
  ingest->callback([&] {
    auto stats = feclust::pipeline::stage_ingest(ingest_reviews, ingest_out);
    std::cout << "reviews: " << stats.reviews_read << " read, "
              << stats.reviews_skipped_empty << " skipped (empty after cleaning)\n";
  });

  // ---- sample ----
  auto* sample = app.add_subcommand("sample", "Stratified per-app sample of a review corpus");
  std::string sample_reviews, sample_out;
  std::size_t sample_size = 0;
  std::uint64_t sample_seed = 42;
  sample->add_option("--reviews", sample_reviews, "Reviews JSONL")->required();
  sample->add_option("--size", sample_size, "Sample size")->required();
  sample->add_option("--seed", sample_seed, "RNG seed");
  sample->add_option("--out", sample_out, "Sampled reviews JSONL")->required();
  sample->callback([&] {
    feclust::pipeline::stage_sample(sample_reviews, sample_size, sample_seed, sample_out);
  });

  // ---- extract-merge ----
  auto* extract = app.add_subcommand(
      "extract-merge", "Normalize, deduplicate and hybrid-merge feature sets");
  std::vector<std::string> extract_features;
  std::vector<std::string> extract_endpoints;
  std::vector<std::string> extract_sources;
  std::string extract_reviews, extract_out;
  bool extract_restrict = false;
  extract->add_option("--features", extract_features, "Feature JSONL file (repeatable)");
  extract->add_option("--extract-endpoint", extract_endpoints,
                      "Extractor service URL (repeatable)");
  extract->add_option("--extract-source", extract_sources,
                      "Source tag per endpoint (syntactic|llm)");
  extract->add_option("--reviews", extract_reviews, "Cleaned reviews JSONL (for extraction)");
  extract->add_flag("--restrict-to-reviews", extract_restrict,
                    "Keep only features whose review_id appears in --reviews");
  extract->add_option("--out", extract_out, "Merged features JSONL")->required();
  extract->callback([&] {
    PipelineConfig cfg;
    for (const auto& f : extract_features) cfg.features_paths.emplace_back(f);
    for (std::size_t i = 0; i < extract_endpoints.size(); ++i) {
      feclust::pipeline::ExtractorSpec spec;
      spec.endpoint = extract_endpoints[i];
      if (i < extract_sources.size()) spec.source = extract_sources[i];
      cfg.extractors.push_back(std::move(spec));
    }
    if (!cfg.extractors.empty() && extract_reviews.empty()) {
      throw feclust::PipelineError("--extract-endpoint needs --reviews");
    }
    if (extract_restrict && extract_reviews.empty()) {
      throw feclust::PipelineError("--restrict-to-reviews needs --reviews");
    }
    feclust::pipeline::stage_extract_merge(cfg, extract_reviews, extract_restrict, extract_out);
  });

  // ---- embed ----
  auto* embed_cmd = app.add_subcommand("embed", "Embed features into unit vectors");
  std::string embed_features_in, embed_out, embed_binary_out;
  ProviderFlags embed_provider;
  embed_cmd->add_option("--features", embed_features_in, "Merged features JSONL")->required();
  embed_cmd->add_option("--out", embed_out, "Embeddings JSONL (cache format)")->required();
  embed_cmd->add_option("--binary-out", embed_binary_out, "Optional FECLV1 binary output");
  embed_provider.attach(embed_cmd);
  embed_cmd->callback([&] {
    PipelineConfig cfg;
    embed_provider.apply(cfg);
    feclust::pipeline::stage_embed(cfg, embed_features_in, embed_out);
    if (!embed_binary_out.empty()) {
      auto matrix = feclust::embed::read_vector_cache(embed_out);
      feclust::embed::write_vectors_binary(embed_binary_out, matrix);
    }
  });

  // ---- cluster ----
  auto* cluster_cmd = app.add_subcommand("cluster", "Build the dendrogram and sweep thresholds");
  std::string cl_features, cl_embeddings, cl_dendrogram, cl_candidates, cl_linkage = "average";
  double cl_start = 0.10, cl_stop = 0.90, cl_step = 0.05;
  cluster_cmd->add_option("--features", cl_features, "Merged features JSONL")->required();
  cluster_cmd->add_option("--embeddings", cl_embeddings, "Embeddings JSONL")->required();
  cluster_cmd->add_option("--dendrogram-out", cl_dendrogram, "Dendrogram JSON")->required();
  cluster_cmd->add_option("--candidates-out", cl_candidates, "Candidate report JSON")->required();
  cluster_cmd->add_option("--linkage", cl_linkage, "Linkage (only average is implemented)");
  cluster_cmd->add_option("--sweep-start", cl_start, "First cut threshold");
  cluster_cmd->add_option("--sweep-stop", cl_stop, "Last cut threshold");
  cluster_cmd->add_option("--sweep-step", cl_step, "Threshold step");
  cluster_cmd->callback([&] {
    PipelineConfig cfg;
    cfg.clustering.linkage = feclust::cluster::linkage_from_string(cl_linkage);
    cfg.clustering.start = cl_start;
    cfg.clustering.stop = cl_stop;
    cfg.clustering.step = cl_step;
    feclust::pipeline::stage_cluster(cfg, cl_features, cl_embeddings, cl_dendrogram,
                                     cl_candidates);
  });

  // ---- select ----
  auto* select_cmd = app.add_subcommand("select", "Pick a clustering candidate");
  std::string se_candidates, se_dendrogram, se_out, se_strategy = "balanced";
  double se_alpha = 0.25, se_gamma = 0.25, se_margin = 0.05;
  select_cmd->add_option("--candidates", se_candidates, "Candidate report JSON")->required();
  select_cmd->add_option("--dendrogram", se_dendrogram, "Dendrogram JSON")->required();
  select_cmd->add_option("--out", se_out, "Selection report JSON")->required();
  select_cmd->add_option("--strategy", se_strategy, "silhouette | balanced | conservative");
  select_cmd->add_option("--alpha", se_alpha, "Cluster-count penalty weight");
  select_cmd->add_option("--gamma", se_gamma, "Max-cluster-size penalty weight");
  select_cmd->add_option("--stability-margin", se_margin, "Conservative silhouette margin");
  select_cmd->callback([&] {
    PipelineConfig cfg;
    cfg.selection.strategy = feclust::select::strategy_from_string(se_strategy);
    cfg.selection.alpha = se_alpha;
    cfg.selection.gamma = se_gamma;
    cfg.selection.stability_margin = se_margin;
    feclust::pipeline::stage_select(cfg, se_candidates, se_dendrogram, se_out);
  });

  // ---- tag ----
  auto* tag_cmd = app.add_subcommand("tag", "Build and label per-cluster mini-taxonomies");
  std::string tg_features, tg_dendrogram, tg_selection, tg_out;
  std::string tg_labeler_mode = "deterministic_stub", tg_labeler_endpoint, tg_labeler_model;
  std::size_t tg_min_subtree = 4;
  ProviderFlags tag_provider;
  tag_cmd->add_option("--features", tg_features, "Merged features JSONL")->required();
  tag_cmd->add_option("--dendrogram", tg_dendrogram, "Dendrogram JSON")->required();
  tag_cmd->add_option("--selection", tg_selection, "Selection report JSON")->required();
  tag_cmd->add_option("--out", tg_out, "Taxonomies JSON")->required();
  tag_cmd->add_option("--labeler-mode", tg_labeler_mode, "remote_llm | deterministic_stub");
  tag_cmd->add_option("--labeler-endpoint", tg_labeler_endpoint, "Chat-completion endpoint");
  tag_cmd->add_option("--labeler-model", tg_labeler_model, "Chat-completion model");
  tag_cmd->add_option("--min-subtree-size", tg_min_subtree, "Smallest labeled subtree");
  tag_provider.attach(tag_cmd);
  tag_cmd->callback([&] {
    PipelineConfig cfg;
    tag_provider.apply(cfg);
    cfg.labeler.mode = tg_labeler_mode == "remote_llm"
                           ? feclust::taxonomy::LabelerMode::remote_llm
                           : feclust::taxonomy::LabelerMode::deterministic_stub;
    cfg.labeler.endpoint = tg_labeler_endpoint;
    cfg.labeler.model = tg_labeler_model;
    if (cfg.labeler.mode == feclust::taxonomy::LabelerMode::remote_llm &&
        cfg.labeler.few_shot_examples.empty()) {
      cfg.labeler.few_shot_examples = feclust::pipeline::default_few_shot_examples();
    }
    cfg.taxonomy.min_subtree_size = tg_min_subtree;
    feclust::pipeline::stage_tag(cfg, tg_features, tg_dendrogram, tg_selection, tg_out);
  });

  // ---- merge ----
  auto* merge_cmd = app.add_subcommand("merge", "Similarity-gated taxonomy merging");
  std::string mg_taxonomies, mg_out;
  double mg_sigma = 0.75;
  ProviderFlags merge_provider;
  merge_cmd->add_option("--taxonomies", mg_taxonomies, "Taxonomies JSON")->required();
  merge_cmd->add_option("--out", mg_out, "Merged taxonomies JSON")->required();
  merge_cmd->add_option("--sigma", mg_sigma, "Root-label similarity threshold");
  merge_provider.attach(merge_cmd);
  merge_cmd->callback([&] {
    PipelineConfig cfg;
    merge_provider.apply(cfg);
    cfg.taxonomy.sigma = mg_sigma;
    feclust::pipeline::stage_merge(cfg, mg_taxonomies, mg_out);
  });

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "Extraction correctness (n-slack matching, P/R/F)");
  std::vector<std::string> ev_predicted;
  std::string ev_gold, ev_out, ev_text;
  double ev_beta = 2.385;
  std::vector<int> ev_nslack;
  eval_cmd->add_option("--predicted", ev_predicted, "Predicted features JSONL (repeatable)")
      ->required();
  eval_cmd->add_option("--gold", ev_gold, "Gold annotations JSONL")->required();
  eval_cmd->add_option("--out", ev_out, "Evaluation report JSON")->required();
  eval_cmd->add_option("--text-out", ev_text, "Aligned plain-text table");
  eval_cmd->add_option("--beta", ev_beta, "F-score weighting factor");
  eval_cmd->add_option("--n-slack", ev_nslack, "Slack settings (repeatable, from {0,1,2})");
  eval_cmd->callback([&] {
    PipelineConfig cfg;
    for (const auto& p : ev_predicted) cfg.features_paths.emplace_back(p);
    cfg.gold_path = ev_gold;
    cfg.eval.beta = ev_beta;
    if (!ev_nslack.empty()) cfg.eval.n_slack = ev_nslack;
    const std::string text_out = ev_text.empty() ? ev_out + ".txt" : ev_text;
    feclust::pipeline::stage_eval(cfg, ev_out, text_out);
  });

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "Quality report (clusters + taxonomies)");
  std::string rp_features, rp_embeddings, rp_candidates, rp_dendrogram, rp_selection,
      rp_taxonomies, rp_eval, rp_out, rp_text;
  ProviderFlags report_provider;
  report_cmd->add_option("--features", rp_features, "Merged features JSONL")->required();
  report_cmd->add_option("--embeddings", rp_embeddings, "Embeddings JSONL")->required();
  report_cmd->add_option("--candidates", rp_candidates, "Candidate report JSON")->required();
  report_cmd->add_option("--dendrogram", rp_dendrogram, "Dendrogram JSON")->required();
  report_cmd->add_option("--selection", rp_selection, "Selection report JSON")->required();
  report_cmd->add_option("--taxonomies", rp_taxonomies, "Merged taxonomies JSON")->required();
  report_cmd->add_option("--eval", rp_eval, "Extraction eval JSON (optional)");
  report_cmd->add_option("--out", rp_out, "Report JSON")->required();
  report_cmd->add_option("--text-out", rp_text, "Report text");
  report_provider.attach(report_cmd);
  report_cmd->callback([&] {
    PipelineConfig cfg;
    report_provider.apply(cfg);
    feclust::pipeline::StageIO io;
    io.features = rp_features;
    io.embeddings = rp_embeddings;
    io.candidates = rp_candidates;
    io.dendrogram = rp_dendrogram;
    io.selection = rp_selection;
    io.taxonomies_merged = rp_taxonomies;
    io.eval_json = rp_eval;
    io.report_json = rp_out;
    io.report_text = rp_text.empty() ? rp_out + ".txt" : rp_text;
    if (!rp_eval.empty()) cfg.gold_path = rp_eval;  // enables the extraction section
    feclust::pipeline::stage_report(cfg, io);
  });

  // ---- export-dot ----
  auto* export_cmd = app.add_subcommand("export-dot", "DOT + CSV graph export");
  std::string xp_taxonomies, xp_dot, xp_nodes, xp_edges;
  export_cmd->add_option("--taxonomies", xp_taxonomies, "Taxonomies JSON")->required();
  export_cmd->add_option("--dot-out", xp_dot, "DOT file")->required();
  export_cmd->add_option("--nodes-out", xp_nodes, "nodes.csv")->required();
  export_cmd->add_option("--edges-out", xp_edges, "edges.csv")->required();
  export_cmd->callback([&] {
    feclust::pipeline::stage_export(xp_taxonomies, xp_dot, xp_nodes, xp_edges);
  });

  // ---- run ----
  auto* run_cmd = app.add_subcommand("run", "Full pipeline: ingest -> cluster -> tag -> report");
  std::optional<std::string> rn_config;
  std::optional<std::string> rn_reviews, rn_gold, rn_out_dir, rn_strategy, rn_labeler_mode,
      rn_dedup_scope, rn_linkage, rn_prompt_template, rn_few_shot_file;
  std::vector<std::string> rn_features;
  std::optional<std::size_t> rn_sample_size, rn_min_subtree, rn_max_label_tokens;
  std::optional<double> rn_sigma, rn_alpha, rn_gamma, rn_margin, rn_beta, rn_start, rn_stop,
      rn_step, rn_temperature;
  std::vector<int> rn_nslack;
  bool rn_offline = false;
  ProviderFlags run_provider;
  run_cmd->add_option("--config", rn_config, "Pipeline config JSON");
  run_cmd->add_option("--reviews", rn_reviews, "Reviews JSONL");
  run_cmd->add_option("--features", rn_features, "Feature JSONL (repeatable)");
  run_cmd->add_option("--gold", rn_gold, "Gold annotations JSONL");
  run_cmd->add_option("--sample-size", rn_sample_size, "Stratified sample size (0 = all)");
  run_cmd->add_option("--dedup-scope", rn_dedup_scope, "corpus_global | per_review");
  run_cmd->add_option("--linkage", rn_linkage, "Linkage method");
  run_cmd->add_option("--sweep-start", rn_start, "First cut threshold");
  run_cmd->add_option("--sweep-stop", rn_stop, "Last cut threshold");
  run_cmd->add_option("--sweep-step", rn_step, "Threshold step");
  run_cmd->add_option("--strategy", rn_strategy, "Selection strategy");
  run_cmd->add_option("--alpha", rn_alpha, "Cluster-count penalty weight");
  run_cmd->add_option("--gamma", rn_gamma, "Max-cluster-size penalty weight");
  run_cmd->add_option("--stability-margin", rn_margin, "Conservative margin");
  run_cmd->add_option("--labeler-mode", rn_labeler_mode, "remote_llm | deterministic_stub");
  run_cmd->add_option("--prompt-template", rn_prompt_template, "Labeler prompt template");
  run_cmd->add_option("--few-shot-file", rn_few_shot_file,
                      "JSON file with [{features:[],label}] examples");
  run_cmd->add_option("--max-label-tokens", rn_max_label_tokens, "Label length cap");
  run_cmd->add_option("--temperature", rn_temperature, "Labeler temperature");
  run_cmd->add_option("--sigma", rn_sigma, "Taxonomy merge threshold");
  run_cmd->add_option("--min-subtree-size", rn_min_subtree, "Smallest labeled subtree");
  run_cmd->add_option("--beta", rn_beta, "F-score weighting factor");
  run_cmd->add_option("--n-slack", rn_nslack, "Slack settings (repeatable)");
  run_cmd->add_option("--out-dir", rn_out_dir, "Output directory");
  run_cmd->add_flag("--offline", rn_offline, "Force hashing embedder + stub labeler");
  run_provider.attach(run_cmd);
  run_cmd->callback([&] {
    PipelineConfig cfg = base_config(rn_config);
    if (rn_reviews) cfg.reviews_path = *rn_reviews;
    if (!rn_features.empty()) {
      cfg.features_paths.clear();
      for (const auto& f : rn_features) cfg.features_paths.emplace_back(f);
    }
    if (rn_gold) cfg.gold_path = *rn_gold;
    if (rn_sample_size) cfg.sample_size = *rn_sample_size;
    if (rn_dedup_scope) {
      cfg.dedup_scope = *rn_dedup_scope == "per_review"
                            ? feclust::corpus::DedupScope::per_review
                            : feclust::corpus::DedupScope::corpus_global;
    }
    if (rn_linkage) cfg.clustering.linkage = feclust::cluster::linkage_from_string(*rn_linkage);
    if (rn_start) cfg.clustering.start = *rn_start;
    if (rn_stop) cfg.clustering.stop = *rn_stop;
    if (rn_step) cfg.clustering.step = *rn_step;
    if (rn_strategy) cfg.selection.strategy = feclust::select::strategy_from_string(*rn_strategy);
    if (rn_alpha) cfg.selection.alpha = *rn_alpha;
    if (rn_gamma) cfg.selection.gamma = *rn_gamma;
    if (rn_margin) cfg.selection.stability_margin = *rn_margin;
    if (rn_labeler_mode) {
      cfg.labeler.mode = *rn_labeler_mode == "remote_llm"
                             ? feclust::taxonomy::LabelerMode::remote_llm
                             : feclust::taxonomy::LabelerMode::deterministic_stub;
    }
    if (rn_prompt_template) cfg.labeler.prompt_template = *rn_prompt_template;
    if (rn_few_shot_file) {
      auto doc = nlohmann::json::parse(feclust::util::read_file(*rn_few_shot_file));
      cfg.labeler.few_shot_examples.clear();
      for (const auto& ex : doc) {
        feclust::taxonomy::FewShotExample example;
        example.features = ex.at("features").get<std::vector<std::string>>();
        example.label = ex.at("label").get<std::string>();
        cfg.labeler.few_shot_examples.push_back(std::move(example));
      }
    }
    if (rn_max_label_tokens) cfg.labeler.max_label_tokens = static_cast<int>(*rn_max_label_tokens);
    if (rn_temperature) cfg.labeler.temperature = *rn_temperature;
    if (rn_sigma) cfg.taxonomy.sigma = *rn_sigma;
    if (rn_min_subtree) cfg.taxonomy.min_subtree_size = *rn_min_subtree;
    if (rn_beta) cfg.eval.beta = *rn_beta;
    if (!rn_nslack.empty()) cfg.eval.n_slack = rn_nslack;
    if (rn_out_dir) cfg.output_dir = *rn_out_dir;
    run_provider.apply(cfg);
    if (rn_offline) cfg.apply_offline();
    auto manifest = feclust::pipeline::run_pipeline(cfg);
    std::cout << "pipeline " << manifest.at("status").get<std::string>() << "; manifest: "
              << (cfg.output_dir / "manifest.json").string() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2, help exits 0
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
