#include "feclust/embed.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>

#include "feclust/util.hpp"

namespace feclust::embed {

namespace {

void normalize_row(std::span<double> row, const std::string& id) {
  double norm_sq = 0.0;
  for (double v : row) {
    if (!std::isfinite(v)) {
      throw PipelineError("non-finite embedding component for '" + id + "'");
    }
    norm_sq += v * v;
  }
  if (norm_sq < 1e-24) {
    throw PipelineError("zero embedding vector for '" + id + "'");
  }
  // already unit-norm rows pass through untouched, so normalization is
  // idempotent and cache round trips stay bit-exact
  if (std::abs(norm_sq - 1.0) < 1e-12) return;
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : row) v *= inv;
}

EmbeddingMatrix embed_inputs(const std::vector<std::string>& inputs, EmbeddingProvider& provider,
                             const EmbedOptions& options) {
  EmbeddingMatrix out;
  out.ids = inputs;
  out.provider_tag = provider.tag();
  if (inputs.empty()) {
    throw std::invalid_argument("nothing to embed");
  }

  // Cached vectors short-circuit the provider; everything else is fetched in
  // batches with bounded fan-out and reassembled by index.
  std::map<std::string, std::vector<double>> cache;
  std::vector<std::string> cache_order;
  if (!options.cache_path.empty() && std::filesystem::exists(options.cache_path)) {
    EmbeddingMatrix cached = read_vector_cache(options.cache_path);
    for (std::size_t i = 0; i < cached.rows(); ++i) {
      auto row = cached.row(i);
      if (cache.emplace(cached.ids[i], std::vector<double>(row.begin(), row.end())).second) {
        cache_order.push_back(cached.ids[i]);
      }
    }
  }

  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (cache.find(inputs[i]) == cache.end()) missing.push_back(i);
  }

  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
  std::vector<std::vector<std::string>> batches;
  for (std::size_t start = 0; start < missing.size(); start += batch_size) {
    std::vector<std::string> batch;
    for (std::size_t i = start; i < std::min(missing.size(), start + batch_size); ++i) {
      batch.push_back(inputs[missing[i]]);
    }
    batches.push_back(std::move(batch));
  }

  std::vector<std::vector<std::vector<double>>> results(batches.size());
  std::vector<std::string> failures;
  const std::size_t fanout = std::max<std::size_t>(1, options.max_in_flight);
  for (std::size_t start = 0; start < batches.size(); start += fanout) {
    const std::size_t end = std::min(batches.size(), start + fanout);
    std::vector<std::future<std::vector<std::vector<double>>>> inflight;
    for (std::size_t b = start; b < end; ++b) {
      inflight.push_back(std::async(std::launch::async, [&provider, &batches, b] {
        return provider.embed_batch(batches[b]);
      }));
    }
    for (std::size_t b = start; b < end; ++b) {
      try {
        results[b] = inflight[b - start].get();
      } catch (const std::exception& e) {
        for (const auto& s : batches[b]) failures.push_back(s + " (" + e.what() + ")");
      }
    }
  }
  if (!failures.empty()) {
    std::string msg = "embedding failed for " + std::to_string(failures.size()) + " surface(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    throw PipelineError(msg);
  }

  std::size_t batch_cursor = 0;
  std::size_t within = 0;
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> fetched;
  for (std::size_t mi = 0; mi < missing.size(); ++mi) {
    while (batch_cursor < results.size() && within == results[batch_cursor].size()) {
      ++batch_cursor;
      within = 0;
    }
    if (batch_cursor == results.size()) {
      throw PipelineError("provider returned fewer vectors than inputs");
    }
    const auto& vec = results[batch_cursor][within++];
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim || vec.empty()) {
      throw PipelineError("embedding dimension mismatch across batches (" +
                          std::to_string(vec.size()) + " vs " + std::to_string(dim) + ")");
    }
    fetched[inputs[missing[mi]]] = vec;
  }

  // Final dimension comes from whichever source supplied vectors.
  if (dim == 0) {
    dim = cache.begin()->second.size();
  }
  for (const auto& [surface, vec] : cache) {
    if (vec.size() != dim) {
      throw PipelineError("cached vector dimension mismatch for '" + surface + "'");
    }
  }
  if (dim < 2) {
    throw PipelineError("embedding dimension must be >= 2");
  }

  out.dim = dim;
  out.data.resize(inputs.size() * dim);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto it = fetched.find(inputs[i]);
    const std::vector<double>& src = it != fetched.end() ? it->second : cache.at(inputs[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
    normalize_row(out.row(i), inputs[i]);
  }

  if (!options.cache_path.empty()) {
    // Union write-back: this run's rows first, then untouched older entries.
    EmbeddingMatrix to_write;
    to_write.dim = dim;
    to_write.provider_tag = out.provider_tag;
    std::map<std::string, bool> written;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      if (written.emplace(out.ids[i], true).second) {
        to_write.ids.push_back(out.ids[i]);
        auto row = out.row(i);
        to_write.data.insert(to_write.data.end(), row.begin(), row.end());
      }
    }
    for (const auto& surface : cache_order) {
      if (written.emplace(surface, true).second) {
        const auto& vec = cache.at(surface);
        to_write.ids.push_back(surface);
        to_write.data.insert(to_write.data.end(), vec.begin(), vec.end());
      }
    }
    write_vector_cache(options.cache_path, to_write);
  }
  return out;
}

}  // namespace

std::vector<double> hashing_embed(std::string_view surface, std::size_t dim, std::uint64_t seed) {
  if (dim < 8) {
    throw std::invalid_argument("hashing embedder needs dimension >= 8");
  }
  std::string padded;
  padded.reserve(surface.size() + 2);
  padded.push_back(' ');
  padded.append(surface);
  padded.push_back(' ');

  std::vector<double> vec(dim, 0.0);
  const std::size_t grams = padded.size() >= 3 ? padded.size() - 2 : 1;
  for (std::size_t i = 0; i < grams; ++i) {
    std::string_view gram(padded.data() + i, std::min<std::size_t>(3, padded.size() - i));
    std::uint64_t h = util::fnv1a64(gram, seed);
    std::size_t bucket = static_cast<std::size_t>(h % dim);
    double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
    vec[bucket] += sign;
  }
  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  if (norm_sq < 1e-24) {
    vec[0] = 1.0;
    return vec;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : vec) v *= inv;
  return vec;
}

HashingProvider::HashingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 8) {
    throw std::invalid_argument("hashing embedder needs dimension >= 8");
  }
}

std::string HashingProvider::tag() const {
  return "hashing-3gram-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

std::vector<std::vector<double>> HashingProvider::embed_batch(
    std::span<const std::string> inputs) {
  std::vector<std::vector<double>> out;
  out.reserve(inputs.size());
  for (const auto& s : inputs) out.push_back(hashing_embed(s, dim_, seed_));
  return out;
}

RemoteProvider::RemoteProvider(RemoteEmbeddingConfig config) : config_(std::move(config)) {}

std::string RemoteProvider::tag() const { return "remote:" + config_.model; }

std::vector<std::vector<double>> RemoteProvider::embed_batch(std::span<const std::string> inputs) {
  nlohmann::json payload;
  payload["model"] = config_.model;
  payload["input"] = nlohmann::json::array();
  for (const auto& s : inputs) payload["input"].push_back(s);

  auto res = remote::post_json(config_.endpoint, payload, config_.retry);
  if (!res.ok) {
    throw PipelineError("embedding endpoint: " + res.error);
  }
  if (!res.body.contains("data") || !res.body.at("data").is_array()) {
    throw PipelineError("embedding response missing data array");
  }
  std::vector<std::vector<double>> out(inputs.size());
  std::vector<bool> seen(inputs.size(), false);
  for (const auto& item : res.body.at("data")) {
    if (!item.contains("index") || !item.contains("embedding")) {
      throw PipelineError("embedding response entry missing index/embedding");
    }
    auto idx = item.at("index").get<std::int64_t>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= inputs.size()) {
      throw PipelineError("embedding response index out of range");
    }
    out[static_cast<std::size_t>(idx)] = item.at("embedding").get<std::vector<double>>();
    seen[static_cast<std::size_t>(idx)] = true;
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!seen[i]) {
      throw PipelineError("embedding response missing vector for input " + std::to_string(i));
    }
  }
  return out;
}

EmbeddingMatrix embed_features(const corpus::FeatureSet& features, EmbeddingProvider& provider,
                               const EmbedOptions& options) {
  if (features.empty()) {
    throw std::invalid_argument("feature set is empty");
  }
  return embed_inputs(features.surfaces(), provider, options);
}

EmbeddingMatrix embed_strings(const std::vector<std::string>& inputs, EmbeddingProvider& provider,
                              const EmbedOptions& options) {
  return embed_inputs(inputs, provider, options);
}

AffinityMatrix affinity(const EmbeddingMatrix& embeddings) {
  const std::size_t n = embeddings.rows();
  if (n > 20000) {
    throw PipelineError(
        "affinity matrix would need " + std::to_string(n) + "^2 entries; sample the corpus "
        "down to <= 20000 features first (see the sample subcommand)");
  }
  AffinityMatrix out;
  out.n = n;
  out.dist.assign(n * n, 0.0);
  const std::size_t dim = embeddings.dim;
  for (std::size_t i = 0; i < n; ++i) {
    auto vi = embeddings.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto vj = embeddings.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += vi[d] * vj[d];
      double dist = 1.0 - dot;
      if (dist < 0.0) dist = 0.0;
      if (dist > 2.0) dist = 2.0;
      out.dist[i * n + j] = dist;
      out.dist[j * n + i] = dist;
    }
  }
  return out;
}

void write_vector_cache(const std::filesystem::path& path, const EmbeddingMatrix& embeddings) {
  std::ostringstream out;
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    nlohmann::json obj;
    obj["surface"] = embeddings.ids[i];
    auto row = embeddings.row(i);
    obj["vector"] = std::vector<double>(row.begin(), row.end());
    out << obj.dump() << '\n';
  }
  util::write_file(path, out.str());
}

EmbeddingMatrix read_vector_cache(const std::filesystem::path& path) {
  EmbeddingMatrix out;
  util::for_each_jsonl(path, [&](std::size_t lineno, const nlohmann::json& obj) {
    if (!obj.contains("surface") || !obj.contains("vector")) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) +
                          ": cache line needs surface and vector");
    }
    auto vec = obj.at("vector").get<std::vector<double>>();
    if (out.dim == 0) out.dim = vec.size();
    if (vec.size() != out.dim || vec.empty()) {
      throw PipelineError(path.string() + ":" + std::to_string(lineno) +
                          ": inconsistent vector dimension");
    }
    out.ids.push_back(obj.at("surface").get<std::string>());
    out.data.insert(out.data.end(), vec.begin(), vec.end());
  });
  for (std::size_t i = 0; i < out.rows(); ++i) {
    normalize_row(out.row(i), out.ids[i]);
  }
  out.provider_tag = "cache:" + path.filename().string();
  return out;
}

void write_vectors_binary(const std::filesystem::path& path, const EmbeddingMatrix& embeddings) {
  std::string buf;
  buf.reserve(10 + embeddings.data.size() * 4);
  buf.append("FECLV1");
  const auto put_u32 = [&buf](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put_u32(static_cast<std::uint32_t>(embeddings.rows()));
  put_u32(static_cast<std::uint32_t>(embeddings.dim));
  for (double v : embeddings.data) {
    put_u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  util::write_file(path, buf);
}

EmbeddingMatrix read_vectors_binary(const std::filesystem::path& path) {
  const std::string buf = util::read_file(path);
  if (buf.size() < 14 || buf.compare(0, 6, "FECLV1") != 0) {
    throw PipelineError(path.string() + ": not a FECLV1 vector file");
  }
  const auto get_u32 = [&buf](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + static_cast<std::size_t>(i)])) << (8 * i);
    }
    return v;
  };
  const std::uint32_t n = get_u32(6);
  const std::uint32_t dim = get_u32(10);
  if (buf.size() != 14 + static_cast<std::size_t>(n) * dim * 4) {
    throw PipelineError(path.string() + ": truncated FECLV1 payload");
  }
  EmbeddingMatrix out;
  out.dim = dim;
  out.data.resize(static_cast<std::size_t>(n) * dim);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = std::bit_cast<float>(get_u32(14 + i * 4));
  }
  // The binary format carries no ids; rows keep positional placeholders.
  out.ids.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) out.ids[i] = "#" + std::to_string(i);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    normalize_row(out.row(i), out.ids[i]);
  }
  out.provider_tag = "binary:" + path.filename().string();
  return out;
}

}  // namespace feclust::embed
