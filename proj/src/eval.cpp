#include "feclust/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "feclust/text.hpp"
#include "feclust/util.hpp"

namespace feclust::eval {

void MatchConfig::validate() const {
  if (n_slack < 0 || n_slack > 2) {
    throw std::invalid_argument("n_slack must be in {0,1,2}");
  }
  if (!(beta > 0.0)) {
    throw std::invalid_argument("beta must be positive");
  }
}

bool tokens_match(const std::vector<std::string>& a, const std::vector<std::string>& b,
                  int n_slack) {
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  if (longer.size() - shorter.size() > static_cast<std::size_t>(n_slack)) return false;
  if (shorter.empty()) return false;
  for (std::size_t start = 0; start + shorter.size() <= longer.size(); ++start) {
    bool hit = true;
    for (std::size_t i = 0; i < shorter.size(); ++i) {
      if (longer[start + i] != shorter[i]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

bool features_match(const corpus::Feature& predicted, const corpus::Feature& gold, int n_slack) {
  return tokens_match(predicted.tokens, gold.tokens, n_slack);
}

std::vector<std::pair<std::size_t, std::size_t>> align_review(
    const std::vector<corpus::Feature>& predicted, const std::vector<corpus::Feature>& gold,
    const MatchConfig& config) {
  config.validate();
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<char> consumed(gold.size(), 0);
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (consumed[g]) continue;
      if (features_match(predicted[p], gold[g], config.n_slack)) {
        consumed[g] = 1;
        matches.emplace_back(p, g);
        break;
      }
    }
  }
  return matches;
}

Prf prf(std::int64_t matched, std::int64_t predicted_total, std::int64_t gold_total, double beta) {
  if (matched < 0 || predicted_total < 0 || gold_total < 0) {
    throw std::invalid_argument("prf counts must be non-negative");
  }
  Prf out;
  out.precision = predicted_total > 0
                      ? static_cast<double>(matched) / static_cast<double>(predicted_total)
                      : 0.0;
  out.recall =
      gold_total > 0 ? static_cast<double>(matched) / static_cast<double>(gold_total) : 0.0;
  if (out.precision == 0.0 && out.recall == 0.0) {
    out.f_beta = 0.0;
  } else {
    const double b2 = beta * beta;
    out.f_beta = (1.0 + b2) * out.precision * out.recall / (b2 * out.precision + out.recall);
  }
  return out;
}

ReviewFeatures load_predicted_features(const std::vector<std::filesystem::path>& paths) {
  ReviewFeatures out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& path : paths) {
    util::for_each_jsonl(path, [&](std::size_t lineno, const json& obj) {
      if (!obj.contains("surface") || !obj.contains("review_id")) {
        throw PipelineError(path.string() + ":" + std::to_string(lineno) +
                            ": predicted feature needs surface and review_id");
      }
      auto normalized = text::normalize_feature(obj.at("surface").get<std::string>());
      if (!normalized) return;
      std::string review_id = obj.at("review_id").get<std::string>();
      if (!seen.insert({review_id, *normalized}).second) return;  // per-review union
      corpus::FeatureSource source = corpus::FeatureSource::hybrid;
      if (obj.contains("source")) {
        source = corpus::feature_source_from_string(obj.at("source").get<std::string>());
      }
      out[review_id].push_back(corpus::Feature::make(std::move(*normalized), review_id, source));
    });
  }
  return out;
}

ReviewFeatures load_gold_features(const std::filesystem::path& path) {
  ReviewFeatures out;
  util::for_each_jsonl(path, [&](std::size_t lineno, const json& obj) {
    if (!obj.contains("review_id") || !obj.contains("features")) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) +
                          ": gold line needs review_id and features");
    }
    std::string review_id = obj.at("review_id").get<std::string>();
    for (const auto& raw : obj.at("features")) {
      auto normalized = text::normalize_feature(raw.get<std::string>());
      if (!normalized) continue;
      // gold duplicates are kept; each is consumable once
      out[review_id].push_back(
          corpus::Feature::make(std::move(*normalized), review_id, corpus::FeatureSource::gold));
    }
  });
  return out;
}

EvalReport evaluate(const ReviewFeatures& predicted, const ReviewFeatures& gold,
                    const MatchConfig& config) {
  config.validate();
  EvalReport report;
  report.n_slack = config.n_slack;
  report.beta = config.beta;

  std::set<std::string> review_ids;
  for (const auto& [id, _] : predicted) review_ids.insert(id);
  for (const auto& [id, _] : gold) review_ids.insert(id);

  static const std::vector<corpus::Feature> kNone;
  for (const auto& review_id : review_ids) {
    auto pit = predicted.find(review_id);
    auto git = gold.find(review_id);
    const auto& p = pit != predicted.end() ? pit->second : kNone;
    const auto& g = git != gold.end() ? git->second : kNone;
    auto matches = align_review(p, g, config);

    ReviewOutcome outcome;
    outcome.review_id = review_id;
    outcome.matched = static_cast<std::int64_t>(matches.size());
    outcome.predicted = static_cast<std::int64_t>(p.size());
    outcome.gold = static_cast<std::int64_t>(g.size());
    report.matched += outcome.matched;
    report.predicted_total += outcome.predicted;
    report.gold_total += outcome.gold;
    report.per_review.push_back(std::move(outcome));
  }
  report.scores = prf(report.matched, report.predicted_total, report.gold_total, config.beta);
  return report;
}

nlohmann::json eval_reports_to_json(const std::vector<EvalReport>& reports) {
  nlohmann::json j;
  j["settings"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json s;
    s["n_slack"] = r.n_slack;
    s["beta"] = r.beta;
    s["matched"] = r.matched;
    s["predicted_total"] = r.predicted_total;
    s["gold_total"] = r.gold_total;
    s["precision"] = r.scores.precision;
    s["recall"] = r.scores.recall;
    s["f_beta"] = r.scores.f_beta;
    s["per_review"] = nlohmann::json::array();
    for (const auto& o : r.per_review) {
      s["per_review"].push_back({{"review_id", o.review_id},
                                 {"matched", o.matched},
                                 {"predicted", o.predicted},
                                 {"gold", o.gold}});
    }
    j["settings"].push_back(std::move(s));
  }
  return j;
}

std::string eval_reports_to_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "match     P        R        F_beta\n";
  for (const auto& r : reports) {
    out << "n=" << r.n_slack << "     " << std::fixed << std::setprecision(3)
        << std::setw(6) << r.scores.precision << "   " << std::setw(6) << r.scores.recall
        << "   " << std::setw(6) << r.scores.f_beta << "\n";
  }
  return out.str();
}

nlohmann::json quality_report(const QualityInputs& inputs) {
  nlohmann::json report;
  report["candidates"] = cluster::candidates_to_json(inputs.candidates);
  const auto& chosen = inputs.candidates.at(inputs.chosen_index);
  report["selection"] = {{"strategy", inputs.strategy},
                         {"threshold", chosen.threshold},
                         {"k", chosen.k},
                         {"silhouette", chosen.silhouette},
                         {"silhouette_std", chosen.silhouette_std},
                         {"davies_bouldin", chosen.davies_bouldin},
                         {"composite", chosen.composite}};
  report["clusters"] = {{"count", chosen.k}};

  taxonomy::TaxonomyStats stats = taxonomy::taxonomy_stats(inputs.taxonomies);
  report["taxonomies"] = nlohmann::json::array();
  for (std::size_t i = 0; i < inputs.taxonomies.size(); ++i) {
    const auto& t = inputs.taxonomies[i];
    report["taxonomies"].push_back({{"taxonomy_id", "t" + std::to_string(i)},
                                    {"label", t.root.label},
                                    {"depth", t.depth()},
                                    {"leaves", t.leaves()},
                                    {"coherence", inputs.coherence.at(i)}});
  }
  report["taxonomy_summary"] = {{"count", inputs.taxonomies.size()},
                                {"mean_depth", stats.mean_depth},
                                {"mean_leaves", stats.mean_leaves},
                                {"min_depth", stats.min_depth},
                                {"max_depth", stats.max_depth},
                                {"min_leaves", stats.min_leaves},
                                {"max_leaves", stats.max_leaves},
                                {"empty_count", stats.empty_count}};

  // top clusters by coherence, descending; ties by taxonomy index
  std::vector<std::size_t> order(inputs.taxonomies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inputs.coherence.at(a) > inputs.coherence.at(b);
  });
  report["top_clusters"] = nlohmann::json::array();
  for (std::size_t rank = 0; rank < std::min(inputs.top_clusters, order.size()); ++rank) {
    const auto& t = inputs.taxonomies[order[rank]];
    std::vector<std::string> leaves;
    t.root.collect_leaf_surfaces(leaves);
    if (leaves.size() > inputs.sample_features) leaves.resize(inputs.sample_features);
    report["top_clusters"].push_back({{"label", t.root.label},
                                      {"coherence", inputs.coherence.at(order[rank])},
                                      {"sample_features", leaves}});
  }

  if (!inputs.extraction.empty()) {
    report["extraction"] = eval_reports_to_json(inputs.extraction);
  }
  return report;
}

std::string quality_report_text(const nlohmann::json& report) {
  std::ostringstream out;
  out << "== clustering candidates ==\n";
  out << "threshold  k      silhouette  davies_bouldin  composite  valid\n";
  for (const auto& c : report.at("candidates")) {
    out << std::fixed << std::setprecision(2) << std::setw(9) << c.at("threshold").get<double>()
        << "  " << std::setw(5) << c.at("k").get<int>() << "  ";
    if (c.at("valid").get<bool>()) {
      std::string db = "inf";
      if (!c.at("davies_bouldin").is_null()) {
        std::ostringstream tmp;
        tmp << std::fixed << std::setprecision(4) << c.at("davies_bouldin").get<double>();
        db = tmp.str();
      }
      out << std::setprecision(4) << std::setw(10) << c.at("silhouette").get<double>() << "  "
          << std::setw(14) << db << "  " << std::setw(9) << c.at("composite").get<double>();
    } else {
      out << "         -               -          -";
    }
    out << "  " << (c.at("valid").get<bool>() ? "yes" : "no") << "\n";
  }

  const auto& sel = report.at("selection");
  out << "\n== selection ==\nstrategy=" << sel.at("strategy").get<std::string>()
      << " threshold=" << std::setprecision(2) << sel.at("threshold").get<double>()
      << " k=" << sel.at("k").get<int>() << " silhouette=" << std::setprecision(4)
      << sel.at("silhouette").get<double>() << "\n";

  const auto& summary = report.at("taxonomy_summary");
  out << "\n== taxonomies ==\ncount=" << summary.at("count").get<std::size_t>()
      << " mean_depth=" << summary.at("mean_depth").get<double>()
      << " mean_leaves=" << summary.at("mean_leaves").get<double>()
      << " empty=" << summary.at("empty_count").get<std::size_t>() << "\n";

  out << "\n== top clusters by coherence ==\n";
  for (const auto& c : report.at("top_clusters")) {
    out << std::setprecision(4) << c.at("coherence").get<double>() << "  "
        << c.at("label").get<std::string>() << "  [";
    bool first = true;
    for (const auto& f : c.at("sample_features")) {
      if (!first) out << ", ";
      out << f.get<std::string>();
      first = false;
    }
    out << "]\n";
  }

  if (report.contains("extraction")) {
    out << "\n== extraction correctness ==\nmatch     P        R        F_beta\n";
    for (const auto& s : report.at("extraction").at("settings")) {
      out << "n=" << s.at("n_slack").get<int>() << "     " << std::fixed << std::setprecision(3)
          << std::setw(6) << s.at("precision").get<double>() << "   " << std::setw(6)
          << s.at("recall").get<double>() << "   " << std::setw(6)
          << s.at("f_beta").get<double>() << "\n";
    }
  }
  return out.str();
}

std::vector<std::string> validate_quality_report(const nlohmann::json& report) {
  std::vector<std::string> problems;
  const auto need = [&](const char* key, const char* type) {
    if (!report.contains(key)) {
      problems.push_back(std::string("missing key: ") + key);
      return false;
    }
    const auto& v = report.at(key);
    bool ok = (std::string(type) == "array" && v.is_array()) ||
              (std::string(type) == "object" && v.is_object());
    if (!ok) problems.push_back(std::string(key) + " is not a " + type);
    return ok;
  };

  if (need("candidates", "array")) {
    for (const auto& c : report.at("candidates")) {
      if (!c.contains("threshold") || !c.contains("k") || !c.contains("valid")) {
        problems.push_back("candidate entry missing threshold/k/valid");
        break;
      }
      if (c.at("valid").get<bool>() &&
          (!c.contains("silhouette") || !c.contains("davies_bouldin") ||
           !c.contains("composite"))) {
        problems.push_back("valid candidate missing metrics");
        break;
      }
    }
  }
  if (need("selection", "object")) {
    for (const char* key : {"strategy", "threshold", "k"}) {
      if (!report.at("selection").contains(key)) {
        problems.push_back(std::string("selection missing ") + key);
      }
    }
  }
  if (need("taxonomies", "array")) {
    for (const auto& t : report.at("taxonomies")) {
      for (const char* key : {"taxonomy_id", "label", "depth", "leaves", "coherence"}) {
        if (!t.contains(key)) {
          problems.push_back(std::string("taxonomy entry missing ") + key);
        }
      }
      if (!problems.empty()) break;
    }
  }
  if (need("taxonomy_summary", "object")) {
    for (const char* key : {"count", "mean_depth", "mean_leaves", "empty_count"}) {
      if (!report.at("taxonomy_summary").contains(key)) {
        problems.push_back(std::string("taxonomy_summary missing ") + key);
      }
    }
  }
  need("top_clusters", "array");
  need("clusters", "object");
  if (report.contains("extraction")) {
    if (!report.at("extraction").contains("settings")) {
      problems.push_back("extraction missing settings");
    } else {
      for (const auto& s : report.at("extraction").at("settings")) {
        for (const char* key : {"n_slack", "precision", "recall", "f_beta"}) {
          if (!s.contains(key)) problems.push_back(std::string("extraction setting missing ") + key);
        }
      }
    }
  }
  return problems;
}

}  // namespace feclust::eval
