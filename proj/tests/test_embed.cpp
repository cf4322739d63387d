#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "feclust/embed.hpp"
#include "feclust/util.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace feclust;
namespace fs = std::filesystem;

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

double norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

TEST_CASE("hashing embed is deterministic and unit length") {
  auto v1 = embed::hashing_embed("dark mode", 256, 0);
  auto v2 = embed::hashing_embed("dark mode", 256, 0);
  CHECK(v1 == v2);
  CHECK(norm(v1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(embed::hashing_embed("dark mode", 256, 1) != v1);
  CHECK_THROWS(embed::hashing_embed("x", 4, 0));
}

TEST_CASE("hashing embed: distinct strings differ") {
  auto a = embed::hashing_embed("abc", 64, 0);
  auto b = embed::hashing_embed("xyz", 64, 0);
  CHECK(cosine(a, b) < 1.0);
}

TEST_CASE("hashing embed: shared n-grams dominate") {
  auto base = embed::hashing_embed("dark mode", 256, 0);
  auto near = embed::hashing_embed("dark modes", 256, 0);
  auto far = embed::hashing_embed("voice input", 256, 0);
  CHECK(cosine(base, near) > cosine(base, far));
}

TEST_CASE("embed_features contract") {
  auto features = fixtures::planted_feature_set(1);  // 3 features
  embed::HashingProvider provider(384, 0);
  auto matrix = embed::embed_features(features, provider);
  CHECK(matrix.rows() == 3);
  CHECK(matrix.dim == 384);
  CHECK(matrix.ids == features.surfaces());
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    double sq = 0.0;
    for (double v : matrix.row(i)) {
      CHECK(std::isfinite(v));
      sq += v * v;
    }
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-6));
  }

  corpus::FeatureSet empty;
  CHECK_THROWS(embed::embed_features(empty, provider));
}

TEST_CASE("embed_features deterministic across batch sizes") {
  auto features = fixtures::planted_feature_set(10);
  embed::HashingProvider provider(128, 7);
  embed::EmbedOptions one;
  one.batch_size = 1;
  embed::EmbedOptions many;
  many.batch_size = 64;
  auto m1 = embed::embed_features(features, provider, one);
  auto m2 = embed::embed_features(features, provider, many);
  CHECK(m1.data == m2.data);
}

TEST_CASE("affinity basics") {
  embed::EmbeddingMatrix m;
  m.dim = 2;
  m.ids = {"a", "b", "c"};
  m.data = {1.0, 0.0,   // a
            0.0, 1.0,   // b: orthogonal to a
            -1.0, 0.0}; // c: antipodal to a
  auto aff = embed::affinity(m);
  CHECK(aff.at(0, 0) == 0.0);
  CHECK(aff.at(1, 1) == 0.0);
  CHECK(aff.at(0, 1) == doctest::Approx(1.0));
  CHECK(aff.at(0, 2) == doctest::Approx(2.0));
  CHECK(aff.at(1, 0) == aff.at(0, 1));
}

TEST_CASE("affinity equals brute force on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 20 + rng() % 180;
    auto m = oracles::random_unit_matrix(n, 16, rng);
    auto aff = embed::affinity(m);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(aff.at(i, i) == 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < m.dim; ++d) dot += m.row(i)[d] * m.row(j)[d];
        double expected = 1.0 - dot;
        if (expected < 0.0) expected = 0.0;
        if (expected > 2.0) expected = 2.0;
        if (i == j) continue;
        CHECK(std::abs(aff.at(i, j) - expected) <= 1e-12);
        CHECK(aff.at(i, j) == aff.at(j, i));
        CHECK(aff.at(i, j) >= 0.0);
        CHECK(aff.at(i, j) <= 2.0);
      }
    }
  }
}

TEST_CASE("vector cache round trip") {
  auto dir = fs::temp_directory_path() / "feclust_embed_cache";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto features = fixtures::planted_feature_set(4);
  embed::HashingProvider provider(64, 3);
  auto matrix = embed::embed_features(features, provider);
  embed::write_vector_cache(dir / "cache.jsonl", matrix);
  auto back = embed::read_vector_cache(dir / "cache.jsonl");
  REQUIRE(back.rows() == matrix.rows());
  CHECK(back.dim == matrix.dim);
  CHECK(back.ids == matrix.ids);
  for (std::size_t i = 0; i < matrix.data.size(); ++i) {
    CHECK(back.data[i] == doctest::Approx(matrix.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("embed_features uses and extends the cache") {
  auto dir = fs::temp_directory_path() / "feclust_embed_cache2";
  fs::remove_all(dir);
  fs::create_directories(dir);

  embed::EmbedOptions options;
  options.cache_path = dir / "cache.jsonl";
  embed::HashingProvider provider(64, 3);

  auto small = fixtures::planted_feature_set(2);
  auto m1 = embed::embed_features(small, provider, options);
  auto large = fixtures::planted_feature_set(4);
  auto m2 = embed::embed_features(large, provider, options);

  // cached rows identical to fresh computation
  auto fresh = embed::embed_features(large, provider);
  CHECK(m2.data == fresh.data);
  (void)m1;
}

TEST_CASE("binary vector file round trip") {
  auto dir = fs::temp_directory_path() / "feclust_embed_bin";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto features = fixtures::planted_feature_set(3);
  embed::HashingProvider provider(32, 5);
  auto matrix = embed::embed_features(features, provider);
  embed::write_vectors_binary(dir / "v.bin", matrix);
  auto back = embed::read_vectors_binary(dir / "v.bin");
  REQUIRE(back.rows() == matrix.rows());
  CHECK(back.dim == matrix.dim);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    // f32 storage: same direction within float precision, rows renormalized
    CHECK(cosine(std::vector<double>(back.row(i).begin(), back.row(i).end()),
                 std::vector<double>(matrix.row(i).begin(), matrix.row(i).end())) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK_THROWS(embed::read_vectors_binary(dir / "missing.bin"));
}

TEST_CASE("embed_strings handles duplicate inputs") {
  embed::HashingProvider provider(64, 1);
  auto m = embed::embed_strings({"same label", "other", "same label"}, provider);
  REQUIRE(m.rows() == 3);
  for (std::size_t d = 0; d < m.dim; ++d) {
    CHECK(m.row(0)[d] == m.row(2)[d]);
  }
}

TEST_CASE("affinity refuses oversized matrices") {
  embed::EmbeddingMatrix m;
  m.dim = 2;
  m.ids.resize(20001, "x");
  m.data.resize(m.ids.size() * 2, 0.5);
  CHECK_THROWS_AS(embed::affinity(m), PipelineError);
}
