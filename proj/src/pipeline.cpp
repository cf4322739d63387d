#include "feclust/pipeline.hpp"

#include <chrono>
#include <map>
#include <set>
#include <sstream>

#include "feclust/extractor.hpp"
#include "feclust/util.hpp"

namespace feclust::pipeline {

namespace {

using nlohmann::json;

remote::RetryPolicy retry_policy(int retries, int backoff_ms) {
  remote::RetryPolicy p;
  p.attempts = retries;
  p.backoff_ms = backoff_ms;
  return p;
}

corpus::FeatureSet load_merged_features(const std::filesystem::path& path,
                                        corpus::DedupScope scope) {
  return corpus::read_features_jsonl(path, scope);
}

std::vector<taxonomy::Taxonomy> load_taxonomies_with_embeddings(
    const std::filesystem::path& path, embed::EmbeddingProvider& provider,
    const embed::EmbedOptions& options) {
  auto taxonomies =
      taxonomy::taxonomies_from_json(json::parse(util::read_file(path)));
  if (taxonomies.empty()) return taxonomies;
  std::vector<std::string> labels;
  labels.reserve(taxonomies.size());
  for (const auto& t : taxonomies) labels.push_back(t.root.label);
  embed::EmbeddingMatrix vectors = embed::embed_strings(labels, provider, options);
  for (std::size_t i = 0; i < taxonomies.size(); ++i) {
    auto row = vectors.row(i);
    taxonomies[i].root_label_embedding.assign(row.begin(), row.end());
  }
  return taxonomies;
}

}  // namespace

void PipelineConfig::validate() const {
  if (reviews_path.empty()) {
    throw PipelineError("config: reviews path is required");
  }
  if (!std::filesystem::exists(reviews_path)) {
    throw PipelineError("config: reviews file not found: " + reviews_path.string());
  }
  if (features_paths.empty() && extractors.empty()) {
    throw PipelineError("config: need feature files or extractor endpoints");
  }
  if (features_paths.empty() && offline) {
    throw PipelineError("config: offline runs need feature files (extractors are skipped)");
  }
  for (const auto& p : features_paths) {
    if (!std::filesystem::exists(p)) {
      throw PipelineError("config: features file not found: " + p.string());
    }
  }
  if (!gold_path.empty() && !std::filesystem::exists(gold_path)) {
    throw PipelineError("config: gold file not found: " + gold_path.string());
  }
  if (!(clustering.start < clustering.stop)) {
    throw PipelineError("config: sweep start must be below stop");
  }
  if (!(clustering.step > 0.0)) {
    throw PipelineError("config: sweep step must be positive");
  }
  if (embedding.mode != "hashing" && embedding.mode != "remote") {
    throw PipelineError("config: embedding mode must be hashing or remote");
  }
  if (embedding.mode == "remote" && embedding.endpoint.empty()) {
    throw PipelineError("config: remote embedding needs an endpoint");
  }
  if (embedding.mode == "hashing" && embedding.dimension < 8) {
    throw PipelineError("config: hashing embedder needs dimension >= 8");
  }
  if (taxonomy.sigma < 0.0 || taxonomy.sigma > 1.0) {
    throw PipelineError("config: sigma must be in [0, 1]");
  }
  if (taxonomy.structural_weight != 0.0) {
    throw PipelineError("config: structural similarity weighting is reserved, set it to 0");
  }
  if (selection.alpha < 0.0 || selection.gamma < 0.0) {
    throw PipelineError("config: selection weights must be >= 0");
  }
  if (selection.stability_margin < 0.0 || selection.stability_margin > 1.0) {
    throw PipelineError("config: stability margin must be in [0, 1]");
  }
  if (labeler.mode == taxonomy::LabelerMode::remote_llm) {
    if (labeler.endpoint.empty()) {
      throw PipelineError("config: remote labeler needs an endpoint");
    }
    if (labeler.few_shot_examples.empty()) {
      throw PipelineError("config: remote labeler needs at least one few-shot example");
    }
  }
  if (!(eval.beta > 0.0)) {
    throw PipelineError("config: beta must be positive");
  }
  for (int n : eval.n_slack) {
    if (n < 0 || n > 2) {
      throw PipelineError("config: n_slack values must be in {0,1,2}");
    }
  }
  if (output_dir.empty()) {
    throw PipelineError("config: output directory is required");
  }
}

void PipelineConfig::apply_offline() {
  offline = true;
  embedding.mode = "hashing";
  labeler.mode = taxonomy::LabelerMode::deterministic_stub;
}

std::vector<taxonomy::FewShotExample> default_few_shot_examples() {
  return {
      {{"dark mode", "night theme", "contrast settings"}, "appearance customization"},
      {{"voice input", "dictation", "speech to text"}, "voice control"},
      {{"offline download", "sync across devices", "cloud backup"}, "data availability"},
  };
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  if (j.contains("inputs")) {
    const auto& in = j.at("inputs");
    if (in.contains("reviews")) c.reviews_path = in.at("reviews").get<std::string>();
    if (in.contains("features")) {
      for (const auto& p : in.at("features")) {
        c.features_paths.emplace_back(p.get<std::string>());
      }
    }
    if (in.contains("gold") && !in.at("gold").is_null()) {
      c.gold_path = in.at("gold").get<std::string>();
    }
  }
  if (j.contains("extractors")) {
    for (const auto& e : j.at("extractors")) {
      ExtractorSpec spec;
      spec.endpoint = e.at("endpoint").get<std::string>();
      spec.source = e.value("source", spec.source);
      spec.batch_size = e.value("batch_size", spec.batch_size);
      spec.retries = e.value("retries", spec.retries);
      spec.backoff_ms = e.value("backoff_ms", spec.backoff_ms);
      c.extractors.push_back(std::move(spec));
    }
  }
  if (j.contains("sample")) {
    c.sample_size = j.at("sample").value("size", std::size_t{0});
  }
  if (j.contains("dedup_scope")) {
    const std::string scope = j.at("dedup_scope").get<std::string>();
    if (scope == "per_review") {
      c.dedup_scope = corpus::DedupScope::per_review;
    } else if (scope == "corpus_global") {
      c.dedup_scope = corpus::DedupScope::corpus_global;
    } else {
      throw PipelineError("config: dedup_scope must be corpus_global or per_review");
    }
  }
  if (j.contains("embedding")) {
    const auto& e = j.at("embedding");
    c.embedding.mode = e.value("mode", c.embedding.mode);
    c.embedding.endpoint = e.value("endpoint", c.embedding.endpoint);
    c.embedding.model = e.value("model", c.embedding.model);
    c.embedding.dimension = e.value("dimension", c.embedding.dimension);
    if (e.contains("cache")) c.embedding.cache_path = e.at("cache").get<std::string>();
    c.embedding.batch_size = e.value("batch_size", c.embedding.batch_size);
    c.embedding.max_in_flight = e.value("max_in_flight", c.embedding.max_in_flight);
    c.embedding.retries = e.value("retries", c.embedding.retries);
    c.embedding.backoff_ms = e.value("backoff_ms", c.embedding.backoff_ms);
  }
  if (j.contains("clustering")) {
    const auto& cl = j.at("clustering");
    c.clustering.linkage = cluster::linkage_from_string(cl.value("linkage", "average"));
    c.clustering.start = cl.value("sweep_start", c.clustering.start);
    c.clustering.stop = cl.value("sweep_stop", c.clustering.stop);
    c.clustering.step = cl.value("sweep_step", c.clustering.step);
  }
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    c.selection.strategy = select::strategy_from_string(s.value("strategy", "balanced"));
    c.selection.alpha = s.value("alpha", c.selection.alpha);
    c.selection.gamma = s.value("gamma", c.selection.gamma);
    c.selection.stability_margin = s.value("stability_margin", c.selection.stability_margin);
    const std::string penalty = s.value("size_penalty", "max_size");
    if (penalty == "max_size") {
      c.selection.size_penalty = select::SizePenalty::max_size;
    } else if (penalty == "variance") {
      c.selection.size_penalty = select::SizePenalty::variance;
    } else if (penalty == "singleton_count") {
      c.selection.size_penalty = select::SizePenalty::singleton_count;
    } else {
      throw PipelineError("config: unknown size_penalty: " + penalty);
    }
  }
  if (j.contains("labeler")) {
    const auto& l = j.at("labeler");
    const std::string mode = l.value("mode", "deterministic_stub");
    if (mode == "remote_llm") {
      c.labeler.mode = taxonomy::LabelerMode::remote_llm;
    } else if (mode == "deterministic_stub") {
      c.labeler.mode = taxonomy::LabelerMode::deterministic_stub;
    } else {
      throw PipelineError("config: labeler mode must be remote_llm or deterministic_stub");
    }
    c.labeler.endpoint = l.value("endpoint", c.labeler.endpoint);
    c.labeler.model = l.value("model", c.labeler.model);
    c.labeler.prompt_template = l.value("prompt_template", c.labeler.prompt_template);
    if (l.contains("few_shot")) {
      for (const auto& ex : l.at("few_shot")) {
        taxonomy::FewShotExample example;
        example.features = ex.at("features").get<std::vector<std::string>>();
        example.label = ex.at("label").get<std::string>();
        c.labeler.few_shot_examples.push_back(std::move(example));
      }
    }
    c.labeler.max_label_tokens = l.value("max_label_tokens", c.labeler.max_label_tokens);
    c.labeler.temperature = l.value("temperature", c.labeler.temperature);
    c.labeler.retry.attempts = l.value("retries", c.labeler.retry.attempts);
    c.labeler.retry.backoff_ms = l.value("backoff_ms", c.labeler.retry.backoff_ms);
  }
  if (c.labeler.mode == taxonomy::LabelerMode::remote_llm &&
      c.labeler.few_shot_examples.empty()) {
    c.labeler.few_shot_examples = default_few_shot_examples();
  }
  if (j.contains("taxonomy")) {
    const auto& t = j.at("taxonomy");
    c.taxonomy.sigma = t.value("sigma", c.taxonomy.sigma);
    c.taxonomy.min_subtree_size = t.value("min_subtree_size", c.taxonomy.min_subtree_size);
    c.taxonomy.structural_weight = t.value("structural_weight", c.taxonomy.structural_weight);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.eval.beta = e.value("beta", c.eval.beta);
    if (e.contains("n_slack")) c.eval.n_slack = e.at("n_slack").get<std::vector<int>>();
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.value("offline", false)) c.apply_offline();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["inputs"]["reviews"] = c.reviews_path.string();
  j["inputs"]["features"] = json::array();
  for (const auto& p : c.features_paths) j["inputs"]["features"].push_back(p.string());
  if (!c.gold_path.empty()) j["inputs"]["gold"] = c.gold_path.string();
  j["extractors"] = json::array();
  for (const auto& e : c.extractors) {
    j["extractors"].push_back({{"endpoint", e.endpoint},
                               {"source", e.source},
                               {"batch_size", e.batch_size},
                               {"retries", e.retries},
                               {"backoff_ms", e.backoff_ms}});
  }
  j["sample"]["size"] = c.sample_size;
  j["dedup_scope"] =
      c.dedup_scope == corpus::DedupScope::per_review ? "per_review" : "corpus_global";
  j["embedding"] = {{"mode", c.embedding.mode},
                    {"endpoint", c.embedding.endpoint},
                    {"model", c.embedding.model},
                    {"dimension", c.embedding.dimension},
                    {"cache", c.embedding.cache_path.string()},
                    {"batch_size", c.embedding.batch_size},
                    {"max_in_flight", c.embedding.max_in_flight},
                    {"retries", c.embedding.retries},
                    {"backoff_ms", c.embedding.backoff_ms}};
  j["clustering"] = {{"linkage", std::string(cluster::to_string(c.clustering.linkage))},
                     {"sweep_start", c.clustering.start},
                     {"sweep_stop", c.clustering.stop},
                     {"sweep_step", c.clustering.step}};
  j["selection"] = {{"strategy", std::string(select::to_string(c.selection.strategy))},
                    {"alpha", c.selection.alpha},
                    {"gamma", c.selection.gamma},
                    {"stability_margin", c.selection.stability_margin},
                    {"size_penalty", "max_size"}};
  j["labeler"] = {{"mode", c.labeler.mode == taxonomy::LabelerMode::remote_llm
                              ? "remote_llm"
                              : "deterministic_stub"},
                  {"endpoint", c.labeler.endpoint},
                  {"model", c.labeler.model},
                  {"prompt_template", c.labeler.prompt_template},
                  {"max_label_tokens", c.labeler.max_label_tokens},
                  {"temperature", c.labeler.temperature},
                  {"retries", c.labeler.retry.attempts},
                  {"backoff_ms", c.labeler.retry.backoff_ms}};
  j["labeler"]["few_shot"] = json::array();
  for (const auto& ex : c.labeler.few_shot_examples) {
    j["labeler"]["few_shot"].push_back({{"features", ex.features}, {"label", ex.label}});
  }
  j["taxonomy"] = {{"sigma", c.taxonomy.sigma},
                   {"min_subtree_size", c.taxonomy.min_subtree_size},
                   {"structural_weight", c.taxonomy.structural_weight}};
  j["eval"] = {{"beta", c.eval.beta}, {"n_slack", c.eval.n_slack}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["offline"] = c.offline;
  return j;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
  return config_from_json(json::parse(util::read_file(path)));
}

std::unique_ptr<embed::EmbeddingProvider> make_provider(const PipelineConfig& config) {
  if (config.embedding.mode == "hashing") {
    return std::make_unique<embed::HashingProvider>(config.embedding.dimension, config.seed);
  }
  embed::RemoteEmbeddingConfig remote_config;
  remote_config.endpoint = config.embedding.endpoint;
  remote_config.model = config.embedding.model;
  remote_config.retry = retry_policy(config.embedding.retries, config.embedding.backoff_ms);
  return std::make_unique<embed::RemoteProvider>(std::move(remote_config));
}

embed::EmbedOptions embed_options(const PipelineConfig& config) {
  embed::EmbedOptions options;
  options.batch_size = config.embedding.batch_size;
  options.max_in_flight = config.embedding.max_in_flight;
  options.cache_path = config.embedding.cache_path;
  return options;
}

StageIO StageIO::in_directory(const std::filesystem::path& dir) {
  StageIO io;
  io.reviews_clean = dir / "reviews_clean.jsonl";
  io.reviews_sampled = dir / "reviews_sampled.jsonl";
  io.features = dir / "features.jsonl";
  io.embeddings = dir / "embeddings.jsonl";
  io.dendrogram = dir / "dendrogram.json";
  io.candidates = dir / "candidates.json";
  io.selection = dir / "selection.json";
  io.taxonomies = dir / "taxonomies.json";
  io.taxonomies_merged = dir / "taxonomies_merged.json";
  io.taxonomies_dot = dir / "taxonomies.dot";
  io.nodes_csv = dir / "nodes.csv";
  io.edges_csv = dir / "edges.csv";
  io.eval_json = dir / "eval.json";
  io.eval_text = dir / "eval.txt";
  io.report_json = dir / "quality_report.json";
  io.report_text = dir / "quality_report.txt";
  io.manifest = dir / "manifest.json";
  return io;
}

corpus::IngestStats stage_ingest(const std::filesystem::path& reviews_in,
                                 const std::filesystem::path& reviews_out) {
  corpus::IngestStats stats;
  auto reviews = corpus::read_reviews_jsonl(reviews_in, &stats);
  auto cleaned = corpus::preprocess_reviews(reviews, &stats);
  corpus::write_reviews_jsonl(reviews_out, cleaned);
  return stats;
}

void stage_sample(const std::filesystem::path& reviews_in, std::size_t size, std::uint64_t seed,
                  const std::filesystem::path& reviews_out) {
  auto reviews = corpus::read_reviews_jsonl(reviews_in);
  auto sampled = corpus::stratified_sample(reviews, size, seed);
  corpus::write_reviews_jsonl(reviews_out, sampled);
}

void stage_extract_merge(const PipelineConfig& config,
                         const std::filesystem::path& reviews_source, bool restrict_to_reviews,
                         const std::filesystem::path& features_out) {
  std::vector<corpus::Review> reviews;
  if (restrict_to_reviews || (!config.extractors.empty() && !config.offline)) {
    reviews = corpus::read_reviews_jsonl(reviews_source);
  }
  std::optional<std::set<std::string>> keep_ids;
  if (restrict_to_reviews) {
    keep_ids.emplace();
    for (const auto& r : reviews) keep_ids->insert(r.review_id);
  }

  const auto restrict_to_sample = [&](const corpus::FeatureSet& set) {
    if (!keep_ids) return set;
    corpus::FeatureSet filtered;
    for (const auto& f : set.features()) {
      if (f.review_id.empty() || keep_ids->count(f.review_id)) {
        filtered.add(f, set.frequency(f.surface));
      }
    }
    return filtered;
  };

  corpus::FeatureSet merged;
  bool first = true;
  const auto fold_in = [&](corpus::FeatureSet set) {
    merged = first ? std::move(set) : corpus::merge_feature_sets(merged, set);
    first = false;
  };

  for (const auto& path : config.features_paths) {
    fold_in(restrict_to_sample(corpus::read_features_jsonl(path, config.dedup_scope)));
  }
  if (!config.offline) {
    for (const auto& spec : config.extractors) {
      extractor::ExtractorConfig client;
      client.endpoint = spec.endpoint;
      client.source = corpus::feature_source_from_string(spec.source);
      client.batch_size = spec.batch_size;
      client.retry = retry_policy(spec.retries, spec.backoff_ms);
      auto result = extractor::fetch_external_features(client, reviews);
      fold_in(std::move(result.features));
    }
  }
  if (merged.empty()) {
    throw PipelineError("extract-merge: feature set is empty after normalization");
  }
  corpus::write_features_jsonl(features_out, merged);
}

void stage_embed(const PipelineConfig& config, const std::filesystem::path& features_in,
                 const std::filesystem::path& embeddings_out) {
  auto features = load_merged_features(features_in, config.dedup_scope);
  auto provider = make_provider(config);
  embed::EmbeddingMatrix matrix = embed::embed_features(features, *provider, embed_options(config));
  embed::write_vector_cache(embeddings_out, matrix);
}

embed::EmbeddingMatrix load_aligned_embeddings(const std::filesystem::path& embeddings_path,
                                               const corpus::FeatureSet& features) {
  embed::EmbeddingMatrix raw = embed::read_vector_cache(embeddings_path);
  std::map<std::string, std::size_t> by_surface;
  for (std::size_t i = 0; i < raw.rows(); ++i) by_surface.emplace(raw.ids[i], i);

  embed::EmbeddingMatrix out;
  out.dim = raw.dim;
  out.provider_tag = raw.provider_tag;
  out.ids = features.surfaces();
  out.data.resize(out.ids.size() * out.dim);
  for (std::size_t i = 0; i < out.ids.size(); ++i) {
    auto it = by_surface.find(out.ids[i]);
    if (it == by_surface.end()) {
      throw PipelineError("embeddings file is missing a vector for '" + out.ids[i] + "'");
    }
    auto src = raw.row(it->second);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void stage_cluster(const PipelineConfig& config, const std::filesystem::path& features_in,
                   const std::filesystem::path& embeddings_in,
                   const std::filesystem::path& dendrogram_out,
                   const std::filesystem::path& candidates_out) {
  auto features = load_merged_features(features_in, config.dedup_scope);
  auto embeddings = load_aligned_embeddings(embeddings_in, features);
  auto affinity = embed::affinity(embeddings);
  auto dendrogram = cluster::average_linkage(affinity);
  auto candidates = cluster::sweep(embeddings, dendrogram, config.clustering, &affinity);
  util::write_file(dendrogram_out, cluster::dendrogram_to_json(dendrogram).dump(2) + "\n");
  util::write_file(candidates_out, cluster::candidates_to_json(candidates).dump(2) + "\n");
}

std::vector<cluster::ClusteringCandidate> load_candidates(
    const std::filesystem::path& candidates_path, const std::filesystem::path& dendrogram_path) {
  auto dendrogram = cluster::dendrogram_from_json(json::parse(util::read_file(dendrogram_path)));
  auto arr = json::parse(util::read_file(candidates_path));
  std::vector<cluster::ClusteringCandidate> out;
  for (const auto& j : arr) {
    cluster::ClusteringCandidate c;
    c.threshold = j.at("threshold").get<double>();
    c.k = j.at("k").get<int>();
    c.valid = j.at("valid").get<bool>();
    c.assignment = cluster::cut(dendrogram, c.threshold);
    if (cluster::cluster_count(c.assignment) != c.k) {
      throw PipelineError("candidates.json does not match the dendrogram (k mismatch at t=" +
                          std::to_string(c.threshold) + ")");
    }
    if (c.valid) {
      c.silhouette = j.at("silhouette").get<double>();
      c.silhouette_std = j.value("silhouette_std", 0.0);
      c.davies_bouldin = j.at("davies_bouldin").is_null()
                             ? std::numeric_limits<double>::infinity()
                             : j.at("davies_bouldin").get<double>();
      c.composite = j.at("composite").get<double>();
    }
    out.push_back(std::move(c));
  }
  return out;
}

void stage_select(const PipelineConfig& config, const std::filesystem::path& candidates_in,
                  const std::filesystem::path& dendrogram_in,
                  const std::filesystem::path& selection_out) {
  auto candidates = load_candidates(candidates_in, dendrogram_in);
  auto result = select::select(candidates, config.selection);
  util::write_file(selection_out,
                   select::selection_to_json(result, candidates, config.selection).dump(2) + "\n");
}

void stage_tag(const PipelineConfig& config, const std::filesystem::path& features_in,
               const std::filesystem::path& dendrogram_in,
               const std::filesystem::path& selection_in,
               const std::filesystem::path& taxonomies_out) {
  auto features = load_merged_features(features_in, config.dedup_scope);
  auto dendrogram = cluster::dendrogram_from_json(json::parse(util::read_file(dendrogram_in)));
  auto selection = json::parse(util::read_file(selection_in));
  const double threshold = selection.at("chosen_threshold").get<double>();
  auto assignment = cluster::cut(dendrogram, threshold);

  auto labeler = taxonomy::make_labeler(config.labeler);
  auto provider = make_provider(config);
  taxonomy::HierarchyConfig hierarchy{config.taxonomy.min_subtree_size};
  auto taxonomies = taxonomy::build_taxonomies(assignment, dendrogram, features.surfaces(),
                                               *labeler, *provider, hierarchy);
  util::write_file(taxonomies_out, taxonomy::taxonomies_to_json(taxonomies).dump(2) + "\n");
}

void stage_merge(const PipelineConfig& config, const std::filesystem::path& taxonomies_in,
                 const std::filesystem::path& taxonomies_out) {
  auto provider = make_provider(config);
  auto taxonomies =
      load_taxonomies_with_embeddings(taxonomies_in, *provider, embed_options(config));
  auto merged = taxonomy::merge_taxonomies(std::move(taxonomies), config.taxonomy.sigma);
  util::write_file(taxonomies_out, taxonomy::taxonomies_to_json(merged).dump(2) + "\n");
}

void stage_eval(const PipelineConfig& config, const std::filesystem::path& eval_json_out,
                const std::filesystem::path& eval_text_out) {
  auto predicted = eval::load_predicted_features(config.features_paths);
  auto gold = eval::load_gold_features(config.gold_path);
  std::vector<eval::EvalReport> reports;
  for (int n : config.eval.n_slack) {
    eval::MatchConfig match{n, config.eval.beta};
    reports.push_back(eval::evaluate(predicted, gold, match));
  }
  util::write_file(eval_json_out, eval::eval_reports_to_json(reports).dump(2) + "\n");
  util::write_file(eval_text_out, eval::eval_reports_to_table(reports));
}

void stage_report(const PipelineConfig& config, const StageIO& io) {
  auto features = load_merged_features(io.features, config.dedup_scope);
  auto embeddings = load_aligned_embeddings(io.embeddings, features);
  auto candidates = load_candidates(io.candidates, io.dendrogram);
  auto selection = json::parse(util::read_file(io.selection));

  auto provider = make_provider(config);
  auto taxonomies =
      load_taxonomies_with_embeddings(io.taxonomies_merged, *provider, embed_options(config));

  eval::QualityInputs inputs;
  inputs.candidates = candidates;
  inputs.chosen_index = selection.at("chosen_index").get<std::size_t>();
  inputs.strategy = selection.at("strategy").get<std::string>();
  inputs.taxonomies = std::move(taxonomies);
  for (const auto& t : inputs.taxonomies) {
    inputs.coherence.push_back(taxonomy::coherence_score(t, embeddings));
  }
  if (!config.gold_path.empty() && std::filesystem::exists(io.eval_json)) {
    auto eval_doc = json::parse(util::read_file(io.eval_json));
    for (const auto& s : eval_doc.at("settings")) {
      eval::EvalReport r;
      r.n_slack = s.at("n_slack").get<int>();
      r.beta = s.at("beta").get<double>();
      r.matched = s.at("matched").get<std::int64_t>();
      r.predicted_total = s.at("predicted_total").get<std::int64_t>();
      r.gold_total = s.at("gold_total").get<std::int64_t>();
      r.scores.precision = s.at("precision").get<double>();
      r.scores.recall = s.at("recall").get<double>();
      r.scores.f_beta = s.at("f_beta").get<double>();
      inputs.extraction.push_back(std::move(r));
    }
  }

  json report = eval::quality_report(inputs);
  auto problems = eval::validate_quality_report(report);
  if (!problems.empty()) {
    std::string msg = "quality report failed schema validation:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw PipelineError(msg);
  }
  util::write_file(io.report_json, report.dump(2) + "\n");
  util::write_file(io.report_text, eval::quality_report_text(report));
}

void stage_export(const std::filesystem::path& taxonomies_in,
                  const std::filesystem::path& dot_out, const std::filesystem::path& nodes_out,
                  const std::filesystem::path& edges_out) {
  auto taxonomies = taxonomy::taxonomies_from_json(json::parse(util::read_file(taxonomies_in)));
  util::write_file(dot_out, taxonomy::taxonomies_to_dot(taxonomies));
  std::string nodes_csv;
  std::string edges_csv;
  taxonomy::taxonomies_to_csv(taxonomies, nodes_csv, edges_csv);
  util::write_file(nodes_out, nodes_csv);
  util::write_file(edges_out, edges_csv);
}

nlohmann::json run_pipeline(const PipelineConfig& config) {
  config.validate();

  const json config_json = config_to_json(config);
  const std::string config_hash = util::to_hex(util::fnv1a64(config_json.dump()));

  json input_checksums = json::object();
  std::string combined = config_hash;
  std::vector<std::filesystem::path> inputs = {config.reviews_path};
  inputs.insert(inputs.end(), config.features_paths.begin(), config.features_paths.end());
  if (!config.gold_path.empty()) inputs.push_back(config.gold_path);
  for (const auto& p : inputs) {
    const std::string sum = util::to_hex(util::checksum_file(p));
    input_checksums[p.filename().string()] = sum;
    combined += sum;
  }

  std::filesystem::create_directories(config.output_dir);
  StageIO io = StageIO::in_directory(config.output_dir);

  json manifest;
  manifest["config_hash"] = config_hash;
  manifest["input_checksums"] = input_checksums;
  manifest["manifest_hash"] = util::to_hex(util::fnv1a64(combined));
  manifest["seed"] = config.seed;
  manifest["stages"] = json::object();
  manifest["stage_timings_ms"] = json::object();
  {
    auto provider = make_provider(config);
    manifest["provider_tags"] = {
        {"embedding", provider->tag()},
        {"labeler", taxonomy::make_labeler(config.labeler)->tag()}};
  }

  const auto record_artifacts = [&]() {
    json artifacts = json::object();
    for (const auto& p :
         {io.reviews_clean, io.reviews_sampled, io.features, io.embeddings, io.dendrogram,
          io.candidates, io.selection, io.taxonomies, io.taxonomies_merged, io.taxonomies_dot,
          io.nodes_csv, io.edges_csv, io.eval_json, io.eval_text, io.report_json,
          io.report_text}) {
      if (std::filesystem::exists(p)) {
        artifacts[p.filename().string()] = util::to_hex(util::checksum_file(p));
      }
    }
    manifest["artifacts"] = artifacts;
  };

  std::string stage_name;
  try {
    const auto timed = [&](const char* name, auto&& fn) {
      stage_name = name;
      const auto start = std::chrono::steady_clock::now();
      fn();
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
      manifest["stages"][name] = "ok";
      manifest["stage_timings_ms"][name] = elapsed;
    };

    timed("ingest", [&] { stage_ingest(config.reviews_path, io.reviews_clean); });

    std::filesystem::path reviews_source = io.reviews_clean;
    const bool sampling = config.sample_size > 0;
    if (sampling) {
      timed("sample", [&] {
        stage_sample(io.reviews_clean, config.sample_size, config.seed, io.reviews_sampled);
      });
      reviews_source = io.reviews_sampled;
    }

    timed("extract-merge",
          [&] { stage_extract_merge(config, reviews_source, sampling, io.features); });
    timed("embed", [&] { stage_embed(config, io.features, io.embeddings); });
    timed("cluster",
          [&] { stage_cluster(config, io.features, io.embeddings, io.dendrogram, io.candidates); });
    timed("select", [&] { stage_select(config, io.candidates, io.dendrogram, io.selection); });
    timed("tag",
          [&] { stage_tag(config, io.features, io.dendrogram, io.selection, io.taxonomies); });
    timed("merge", [&] { stage_merge(config, io.taxonomies, io.taxonomies_merged); });
    timed("export", [&] {
      stage_export(io.taxonomies_merged, io.taxonomies_dot, io.nodes_csv, io.edges_csv);
    });
    if (!config.gold_path.empty()) {
      timed("eval", [&] { stage_eval(config, io.eval_json, io.eval_text); });
    }
    timed("report", [&] { stage_report(config, io); });
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["failed_stage"] = stage_name;
    manifest["error"] = e.what();
    record_artifacts();
    util::write_file(io.manifest, manifest.dump(2) + "\n");
    throw PipelineError("stage '" + stage_name + "' failed: " + e.what());
  }

  manifest["status"] = "complete";
  record_artifacts();
  util::write_file(io.manifest, manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace feclust::pipeline
