#include <doctest.h>

#include <cmath>
#include <random>

#include "feclust/eval.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace feclust;

namespace {

corpus::Feature feat(const std::string& surface) {
  return corpus::Feature::make(surface, "r1", corpus::FeatureSource::hybrid);
}

std::vector<corpus::Feature> feats(std::initializer_list<const char*> surfaces) {
  std::vector<corpus::Feature> out;
  for (const char* s : surfaces) out.push_back(feat(s));
  return out;
}

}  // namespace

TEST_CASE("features_match identity and slack") {
  CHECK(eval::features_match(feat("dark mode"), feat("dark mode"), 0));
  CHECK(eval::features_match(feat("download"), feat("download stuff"), 1));
  CHECK_FALSE(eval::features_match(feat("download"), feat("download stuff"), 0));
  CHECK_FALSE(eval::features_match(feat("voice input"), feat("input voice"), 0));
}

TEST_CASE("features_match requires contiguity") {
  CHECK(eval::features_match(feat("mode toggle"), feat("dark mode toggle"), 1));
  CHECK_FALSE(eval::features_match(feat("dark toggle"), feat("dark mode toggle"), 1));
  CHECK(eval::features_match(feat("b c"), feat("a b c d"), 2));
  CHECK_FALSE(eval::features_match(feat("a d"), feat("a b c d"), 2));
}

TEST_CASE("features_match symmetry and monotonicity on random pairs") {
  std::mt19937_64 rng(31);
  const char* vocab[] = {"a", "b", "c", "d", "e"};
  const auto random_feature = [&]() {
    const std::size_t len = 1 + rng() % 4;
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
      if (i) s += ' ';
      s += vocab[rng() % 5];
    }
    return feat(s);
  };
  for (int trial = 0; trial < 500; ++trial) {
    auto p = random_feature();
    auto g = random_feature();
    bool prev = false;
    for (int n = 0; n <= 2; ++n) {
      const bool m = eval::features_match(p, g, n);
      CHECK(m == eval::features_match(g, p, n));  // symmetric
      if (prev) CHECK(m);                         // monotone in n
      prev = m;
    }
  }
}

TEST_CASE("align_review basics") {
  eval::MatchConfig config{0, 2.385};
  auto both = feats({"a", "b"});
  CHECK(eval::align_review(both, both, config).size() == 2);
  CHECK(eval::align_review(feats({"a"}), {}, config).empty());
  CHECK(eval::align_review({}, feats({"a"}), config).empty());
}

TEST_CASE("align_review greedy artifact matches bipartite optimum here") {
  eval::MatchConfig config{1, 2.385};
  auto predicted = feats({"x", "x y"});
  auto gold = feats({"x y"});
  auto matches = eval::align_review(predicted, gold, config);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].first == 0);  // greedy: "x" consumed the only gold

  std::vector<std::vector<bool>> edges(predicted.size(),
                                       std::vector<bool>(gold.size(), false));
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      edges[p][g] = eval::features_match(predicted[p], gold[g], config.n_slack);
    }
  }
  CHECK(oracles::max_bipartite_matching(edges) == 1);
}

TEST_CASE("align_review greedy vs optimal on random instances") {
  std::mt19937_64 rng(67);
  const char* vocab[] = {"a", "b", "c"};
  const auto random_list = [&](std::size_t max_len) {
    std::vector<corpus::Feature> out;
    const std::size_t count = rng() % (max_len + 1);
    for (std::size_t i = 0; i < count; ++i) {
      std::string s;
      const std::size_t len = 1 + rng() % 3;
      for (std::size_t t = 0; t < len; ++t) {
        if (t) s += ' ';
        s += vocab[rng() % 3];
      }
      out.push_back(feat(s));
    }
    return out;
  };
  for (int trial = 0; trial < 300; ++trial) {
    auto predicted = random_list(5);
    auto gold = random_list(5);
    for (int n = 0; n <= 2; ++n) {
      eval::MatchConfig config{n, 2.385};
      auto greedy = eval::align_review(predicted, gold, config).size();
      std::vector<std::vector<bool>> edges(predicted.size(),
                                           std::vector<bool>(gold.size(), false));
      for (std::size_t p = 0; p < predicted.size(); ++p) {
        for (std::size_t g = 0; g < gold.size(); ++g) {
          edges[p][g] = eval::features_match(predicted[p], gold[g], n);
        }
      }
      auto optimal = oracles::max_bipartite_matching(edges);
      CHECK(greedy <= optimal);  // greedy is one-to-one, optimum bounds it
    }
  }
}

TEST_CASE("matched count monotone in n_slack") {
  std::mt19937_64 rng(68);
  const char* vocab[] = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<corpus::Feature> predicted, gold;
    for (std::size_t i = 0; i < rng() % 6; ++i) {
      std::string s;
      const std::size_t len = 1 + rng() % 3;
      for (std::size_t t = 0; t < len; ++t) {
        if (t) s += ' ';
        s += vocab[rng() % 4];
      }
      predicted.push_back(feat(s));
    }
    for (std::size_t i = 0; i < rng() % 6; ++i) {
      std::string s;
      const std::size_t len = 1 + rng() % 3;
      for (std::size_t t = 0; t < len; ++t) {
        if (t) s += ' ';
        s += vocab[rng() % 4];
      }
      gold.push_back(feat(s));
    }
    std::size_t prev = 0;
    for (int n = 0; n <= 2; ++n) {
      eval::MatchConfig config{n, 2.385};
      const std::size_t matched = eval::align_review(predicted, gold, config).size();
      CHECK(matched >= prev);
      prev = matched;
    }
  }
}

TEST_CASE("prf: published examples") {
  auto crowd_hybrid = eval::prf(472, 1000, 633, 2.385);  // P=0.472, R=0.746 (approx counts)
  (void)crowd_hybrid;
  // direct ratio form
  const double b = 2.385;
  const auto f = [&](double p, double r) {
    return (1.0 + b * b) * p * r / (b * b * p + r);
  };
  CHECK(f(0.472, 0.746) == doctest::Approx(0.686).epsilon(0.002));
  CHECK(f(0.722, 0.661) == doctest::Approx(0.669).epsilon(0.002));
}

TEST_CASE("prf: zero conventions and P=R identity") {
  auto zero = eval::prf(0, 0, 0, 2.385);
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.f_beta == 0.0);

  auto equal = eval::prf(3, 6, 6, 2.385);
  CHECK(equal.precision == doctest::Approx(0.5));
  CHECK(equal.recall == doctest::Approx(0.5));
  CHECK(equal.f_beta == doctest::Approx(0.5).epsilon(1e-12));  // F = P = R

  auto other = eval::prf(3, 6, 6, 0.5);
  CHECK(other.f_beta == doctest::Approx(0.5).epsilon(1e-12));  // any beta
}

TEST_CASE("prf recall-weighted: F between min and max, pulled toward R") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const double p = 0.05 + 0.9 * static_cast<double>(rng() >> 11) / 9007199254740992.0;
    const double r = 0.05 + 0.9 * static_cast<double>(rng() >> 11) / 9007199254740992.0;
    const double b = 2.385;
    const double f = (1.0 + b * b) * p * r / (b * b * p + r);
    CHECK(f >= std::min(p, r) - 1e-12);
    CHECK(f <= std::max(p, r) + 1e-12);
    // recall weighting: beta > 1 moves F toward R relative to the even mean
    const double f1 = 2.0 * p * r / (p + r);
    if (std::abs(p - r) > 1e-6) {
      CHECK((r > p ? f > f1 : f < f1));
    }
  }
  // on the hybrid rows of the published table, F sits closer to R than to P
  for (const auto& row : fixtures::correctness_table()) {
    if (std::string(row.method) != "hybrid" || std::string(row.dataset) == "avg") continue;
    CHECK(std::abs(row.f_beta - row.recall) < std::abs(row.f_beta - row.precision));
  }
}

TEST_CASE("published table: per-dataset F cells reproduce within tolerance") {
  for (const auto& row : fixtures::correctness_table()) {
    if (std::string(row.dataset) == "avg") continue;  // means of F columns, not F of means
    const double b = 2.385;
    const double f =
        (1.0 + b * b) * row.precision * row.recall / (b * b * row.precision + row.recall);
    CHECK(std::abs(f - row.f_beta) <= 0.001);
  }
}

TEST_CASE("evaluate micro-averages across reviews") {
  eval::ReviewFeatures predicted;
  predicted["r1"] = feats({"dark mode", "extra"});
  predicted["r2"] = feats({"voice input"});
  eval::ReviewFeatures gold;
  gold["r1"] = feats({"dark mode"});
  gold["r2"] = feats({"voice input", "missed"});

  eval::MatchConfig config{0, 2.385};
  auto report = eval::evaluate(predicted, gold, config);
  CHECK(report.matched == 2);
  CHECK(report.predicted_total == 3);
  CHECK(report.gold_total == 3);
  CHECK(report.scores.precision == doctest::Approx(2.0 / 3.0));
  CHECK(report.scores.recall == doctest::Approx(2.0 / 3.0));
  REQUIRE(report.per_review.size() == 2);
  for (const auto& r : report.per_review) {
    CHECK(r.matched <= std::min(r.predicted, r.gold));
  }
}

TEST_CASE("gold duplicates are each consumable once") {
  eval::ReviewFeatures predicted;
  predicted["r1"] = feats({"dark mode"});
  eval::ReviewFeatures gold;
  gold["r1"] = feats({"dark mode", "dark mode"});

  eval::MatchConfig config{0, 2.385};
  auto report = eval::evaluate(predicted, gold, config);
  CHECK(report.matched == 1);
  CHECK(report.gold_total == 2);
  CHECK(report.scores.recall == doctest::Approx(0.5));
}

TEST_CASE("eval report json and table") {
  eval::ReviewFeatures predicted;
  predicted["r1"] = feats({"a", "b"});
  eval::ReviewFeatures gold;
  gold["r1"] = feats({"a"});

  std::vector<eval::EvalReport> reports;
  for (int n : {0, 1, 2}) {
    reports.push_back(eval::evaluate(predicted, gold, eval::MatchConfig{n, 2.385}));
  }
  auto j = eval::eval_reports_to_json(reports);
  REQUIRE(j.at("settings").size() == 3);
  for (const auto& s : j.at("settings")) {
    // internal consistency: F recomputable from its own P/R cells
    const double p = s.at("precision").get<double>();
    const double r = s.at("recall").get<double>();
    const double b = s.at("beta").get<double>();
    const double expect =
        (p == 0.0 && r == 0.0) ? 0.0 : (1.0 + b * b) * p * r / (b * b * p + r);
    CHECK(std::abs(s.at("f_beta").get<double>() - expect) <= 5e-4);
  }
  auto table = eval::eval_reports_to_table(reports);
  CHECK(table.find("n=0") != std::string::npos);
  CHECK(table.find("n=2") != std::string::npos);
}

TEST_CASE("match config validation") {
  CHECK_THROWS(eval::MatchConfig{3, 2.385}.validate());
  CHECK_THROWS(eval::MatchConfig{0, 0.0}.validate());
  CHECK_NOTHROW(eval::MatchConfig{2, 1.0}.validate());
}

TEST_CASE("quality report validator flags missing pieces") {
  nlohmann::json bogus = {{"candidates", nlohmann::json::array()}};
  auto problems = eval::validate_quality_report(bogus);
  CHECK_FALSE(problems.empty());

  nlohmann::json bad_candidate = {
      {"candidates", nlohmann::json::array({{{"threshold", 0.5}}})},
      {"selection", {{"strategy", "balanced"}, {"threshold", 0.5}, {"k", 3}}},
      {"clusters", {{"count", 3}}},
      {"taxonomies", nlohmann::json::array()},
      {"taxonomy_summary",
       {{"count", 0}, {"mean_depth", 0.0}, {"mean_leaves", 0.0}, {"empty_count", 0}}},
      {"top_clusters", nlohmann::json::array()}};
  problems = eval::validate_quality_report(bad_candidate);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("candidate entry") != std::string::npos);
}
