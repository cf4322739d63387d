#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "feclust/corpus.hpp"
#include "feclust/taxonomy.hpp"

namespace feclust::eval {

struct MatchConfig {
  int n_slack = 0;       // allowed token-count difference, in {0,1,2}
  double beta = 2.385;   // recall-weighted F

  void validate() const;
};

/// True iff one token sequence is a contiguous subsequence of the other and
/// the token counts differ by at most n_slack. Symmetric; monotone in
/// n_slack.
bool features_match(const corpus::Feature& predicted, const corpus::Feature& gold, int n_slack);
bool tokens_match(const std::vector<std::string>& a, const std::vector<std::string>& b,
                  int n_slack);

/// Greedy one-to-one alignment: predicted in order, each consuming the first
/// unconsumed matching gold feature. Returns (predicted_idx, gold_idx) pairs.
std::vector<std::pair<std::size_t, std::size_t>> align_review(
    const std::vector<corpus::Feature>& predicted, const std::vector<corpus::Feature>& gold,
    const MatchConfig& config);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
};

/// P = matched/predicted, R = matched/gold (0 on zero denominators),
/// F_beta = (1+b^2)PR / (b^2 P + R), 0 when both P and R are 0.
Prf prf(std::int64_t matched, std::int64_t predicted_total, std::int64_t gold_total, double beta);

struct ReviewOutcome {
  std::string review_id;
  std::int64_t matched = 0;
  std::int64_t predicted = 0;
  std::int64_t gold = 0;
};

struct EvalReport {
  int n_slack = 0;
  double beta = 2.385;
  std::vector<ReviewOutcome> per_review;
  std::int64_t matched = 0;
  std::int64_t predicted_total = 0;
  std::int64_t gold_total = 0;
  Prf scores;
};

/// Per-review feature lists. Predicted lists are per-review surface unions;
/// gold keeps duplicates (each consumable once).
using ReviewFeatures = std::map<std::string, std::vector<corpus::Feature>>;

ReviewFeatures load_predicted_features(const std::vector<std::filesystem::path>& paths);
ReviewFeatures load_gold_features(const std::filesystem::path& path);

/// Corpus-level micro-averaged evaluation at one slack setting.
EvalReport evaluate(const ReviewFeatures& predicted, const ReviewFeatures& gold,
                    const MatchConfig& config);

nlohmann::json eval_reports_to_json(const std::vector<EvalReport>& reports);
std::string eval_reports_to_table(const std::vector<EvalReport>& reports);

// ---- Quality report (clustering + taxonomy side) -----------------------------

struct QualityInputs {
  std::vector<cluster::ClusteringCandidate> candidates;
  std::size_t chosen_index = 0;
  std::string strategy;
  std::vector<taxonomy::Taxonomy> taxonomies;
  std::vector<double> coherence;  // parallel to taxonomies
  std::vector<EvalReport> extraction;  // may be empty
  std::size_t top_clusters = 5;
  std::size_t sample_features = 5;
};

nlohmann::json quality_report(const QualityInputs& inputs);
std::string quality_report_text(const nlohmann::json& report);

/// Structural check against the published report schema; returns the list of
/// violations (empty = valid).
std::vector<std::string> validate_quality_report(const nlohmann::json& report);

}  // namespace feclust::eval
