// Shared test fixtures: published correctness-table triples, the planted
// three-cluster feature fixture, and a small synthetic review corpus for
// end-to-end runs.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "feclust/corpus.hpp"

namespace fixtures {

struct PrfTriple {
  const char* dataset;
  const char* method;
  int n_slack;
  double precision;
  double recall;
  double f_beta;
};

// The published 27 (P, R, F) triples the harness reproduces (beta = 2.385).
// The Avg rows are the source table's arithmetic means of the per-dataset
// columns.
inline const std::array<PrfTriple, 27>& correctness_table() {
  static const std::array<PrfTriple, 27> table = {{
      {"expert", "syntactic", 0, 0.027, 0.022, 0.023},
      {"expert", "syntactic", 1, 0.197, 0.165, 0.169},
      {"expert", "syntactic", 2, 0.248, 0.208, 0.213},
      {"expert", "llm", 0, 0.211, 0.078, 0.086},
      {"expert", "llm", 1, 0.386, 0.142, 0.157},
      {"expert", "llm", 2, 0.471, 0.174, 0.192},
      {"expert", "hybrid", 0, 0.082, 0.099, 0.096},
      {"expert", "hybrid", 1, 0.238, 0.286, 0.278},
      {"expert", "hybrid", 2, 0.291, 0.348, 0.338},
      {"crowd", "syntactic", 0, 0.022, 0.021, 0.021},
      {"crowd", "syntactic", 1, 0.162, 0.140, 0.143},
      {"crowd", "syntactic", 2, 0.263, 0.226, 0.231},
      {"crowd", "llm", 0, 0.722, 0.661, 0.669},
      {"crowd", "llm", 1, 0.739, 0.676, 0.685},
      {"crowd", "llm", 2, 0.739, 0.677, 0.685},
      {"crowd", "hybrid", 0, 0.472, 0.746, 0.686},
      {"crowd", "hybrid", 1, 0.489, 0.774, 0.712},
      {"crowd", "hybrid", 2, 0.496, 0.787, 0.724},
      {"avg", "syntactic", 0, 0.025, 0.022, 0.022},
      {"avg", "syntactic", 1, 0.180, 0.153, 0.156},
      {"avg", "syntactic", 2, 0.256, 0.217, 0.222},
      {"avg", "llm", 0, 0.467, 0.370, 0.378},
      {"avg", "llm", 1, 0.563, 0.409, 0.421},
      {"avg", "llm", 2, 0.605, 0.426, 0.439},
      {"avg", "hybrid", 0, 0.277, 0.423, 0.391},
      {"avg", "hybrid", 1, 0.364, 0.530, 0.495},
      {"avg", "hybrid", 2, 0.394, 0.568, 0.531},
  }};
  return table;
}

// Review counts per app from the sample-study corpus, with the frozen
// largest-remainder allocation at sample size 2000.
inline const std::vector<std::int64_t>& app_review_counts() {
  static const std::vector<std::int64_t> counts = {119892, 26883, 5323, 3818, 1334, 882, 75};
  return counts;
}
inline const std::vector<std::size_t>& expected_allocation_2000() {
  static const std::vector<std::size_t> alloc = {1516, 340, 67, 48, 17, 11, 1};
  return alloc;
}

// ---- planted three-cluster fixture ------------------------------------------

// Three disjoint token vocabularies; every feature is "<head> <mid> <tail>"
// with head+mid shared inside the group, so intra-group hashing similarity is
// high and cross-group similarity is near zero.
inline std::vector<std::string> planted_group_surfaces(int group, std::size_t count) {
  static const std::array<const char*, 3> heads = {"video", "cloud", "voice"};
  static const std::array<const char*, 3> mids = {"playback", "backup", "assistant"};
  static const std::array<std::array<const char*, 20>, 3> tails = {{
      {"speed", "quality", "resolution", "buffering", "controls", "casting", "subtitles",
       "zoom", "rotation", "brightness", "looping", "shuffle", "queue", "history", "resume",
       "preview", "thumbnails", "chapters", "bookmarks", "timeline"},
      {"encryption", "schedule", "restore", "archive", "versioning", "quota", "compression",
       "mirroring", "snapshots", "transfer", "migration", "redundancy", "retention",
       "recovery", "storage", "folders", "permissions", "monitoring", "alerts", "logging"},
      {"wakeword", "commands", "dictation", "transcripts", "accents", "hotkeys", "replies",
       "greetings", "pronunciation", "whisper", "loudness", "pitch", "tempo", "echo",
       "feedback", "calibration", "sensitivity", "profiles", "onboarding", "tutorials"},
  }};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count && i < 20; ++i) {
    out.push_back(std::string(heads[static_cast<std::size_t>(group)]) + " " +
                  mids[static_cast<std::size_t>(group)] + " " +
                  tails[static_cast<std::size_t>(group)][i]);
  }
  return out;
}

/// 3 x `per_group` planted features, grouped contiguously.
inline feclust::corpus::FeatureSet planted_feature_set(std::size_t per_group = 20) {
  feclust::corpus::FeatureSet set;
  for (int g = 0; g < 3; ++g) {
    for (const auto& surface : planted_group_surfaces(g, per_group)) {
      set.add(feclust::corpus::Feature::make(surface, "r" + std::to_string(g),
                                             feclust::corpus::FeatureSource::hybrid));
    }
  }
  return set;
}

// ---- end-to-end corpus --------------------------------------------------------

struct DemoCorpus {
  std::filesystem::path reviews;
  std::filesystem::path features_syntactic;
  std::filesystem::path features_llm;
  std::filesystem::path gold;
};

/// Writes a synthetic 3-app corpus whose hybrid feature union is exactly 50
/// surfaces (17 + 17 + 16 planted features). Review bodies carry emoji and
/// URL noise so ingestion has something to clean.
inline DemoCorpus write_demo_corpus(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DemoCorpus paths;
  paths.reviews = dir / "reviews.jsonl";
  paths.features_syntactic = dir / "features_syntactic.jsonl";
  paths.features_llm = dir / "features_llm.jsonl";
  paths.gold = dir / "gold.jsonl";

  const std::array<std::size_t, 3> group_sizes = {17, 17, 16};
  std::ofstream reviews(paths.reviews);
  std::ofstream syntactic(paths.features_syntactic);
  std::ofstream llm(paths.features_llm);
  std::ofstream gold(paths.gold);

  for (int g = 0; g < 3; ++g) {
    const auto surfaces = planted_group_surfaces(g, group_sizes[static_cast<std::size_t>(g)]);
    const std::string app = "app" + std::to_string(g);
    for (std::size_t r = 0; r * 3 < surfaces.size(); ++r) {
      const std::string review_id = "r" + std::to_string(g) + "_" + std::to_string(r);
      std::string body = "Really love it \xF0\x9F\x98\x8D see https://example.com/x now. ";
      std::string gold_list;
      const auto add_gold = [&](const std::string& surface) {
        if (!gold_list.empty()) gold_list += ", ";
        gold_list += "\"" + surface + "\"";
      };
      for (std::size_t i = r * 3; i < std::min(surfaces.size(), r * 3 + 3); ++i) {
        body += "The " + surfaces[i] + " works well. ";
        // gold annotations are imperfect on purpose: some entries carry an
        // extra word (matched only with slack), some predictions go
        // unannotated (precision loss)
        if (i % 5 == 0) {
          add_gold(surfaces[i] + " option");
        } else if (i % 7 != 3) {
          add_gold(surfaces[i]);
        }
        // overlap: middle feature of each review appears in both extractor files
        const bool in_syntactic = (i % 3 != 2);
        const bool in_llm = (i % 3 != 0);
        if (in_syntactic) {
          syntactic << "{\"surface\": \"" << surfaces[i] << "\", \"review_id\": \"" << review_id
                    << "\", \"source\": \"syntactic\", \"freq\": 1}\n";
        }
        if (in_llm) {
          llm << "{\"surface\": \"" << surfaces[i] << "\", \"review_id\": \"" << review_id
              << "\", \"source\": \"llm\", \"freq\": 1}\n";
        }
      }
      if (r == 0) {
        add_gold("unextracted bonus capability");  // recall loss at every slack
      }
      reviews << "{\"review_id\": \"" << review_id << "\", \"app_id\": \"" << app
              << "\", \"body\": \"" << body << "\", \"submitted_at\": \"2025-07-17\"}\n";
      gold << "{\"review_id\": \"" << review_id << "\", \"features\": [" << gold_list << "]}\n";
    }
  }
  return paths;
}

}  // namespace fixtures
