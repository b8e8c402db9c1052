#include "skbf/vector_search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "digest.hpp"
#include "http_json.hpp"
#include "skbf/errors.hpp"
#include "skbf/io.hpp"

namespace skbf {

using json = nlohmann::json;

namespace {

bool is_token_byte(unsigned char c) {
  return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

void l2_normalize(EmbeddingVector& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw EmbedError("embedding has zero norm");
  for (double& x : v) x /= norm;
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

}  // namespace

// HashingEmbedder

std::size_t HashingEmbedder::bucket_of(std::string_view token) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h % kDimension);
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  EmbeddingVector v(kDimension, 0.0);
  std::string token;
  bool any = false;
  auto flush = [&] {
    if (token.empty()) return;
    v[bucket_of(token)] += 1.0;
    any = true;
    token.clear();
  };
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      token.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                           : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  if (!any) throw EmbedError("text has no tokens to embed");
  l2_normalize(v);
  return v;
}

// HttpEmbedder

HttpEmbedder::HttpEmbedder(HttpEmbedderOptions options)
    : options_(std::move(options)), dimension_(options_.dimension) {
  if (options_.base_url.empty()) throw ConfigError("HTTP embedder needs a base URL");
  if (options_.model.empty()) throw ConfigError("HTTP embedder needs a model name");
}

EmbeddingVector HttpEmbedder::embed(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  const json body = {{"model", options_.model}, {"input", std::string(text)}};
  std::string last_error;
  const int attempts = std::max(1, options_.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      const json reply = detail::post_json(options_.base_url, options_.path, options_.api_key, body,
                                           options_.timeout);
      EmbeddingVector v = reply.at("data").at(0).at("embedding").get<EmbeddingVector>();
      if (v.empty()) throw EmbedError("embedding reply is empty");
      std::size_t expected = 0;
      dimension_.compare_exchange_strong(expected, v.size());
      if (v.size() != dimension_.load()) {
        throw EmbedError("embedding dimension " + std::to_string(v.size()) + " differs from " +
                         std::to_string(dimension_.load()));
      }
      for (double x : v) {
        if (!std::isfinite(x)) throw EmbedError("embedding reply has a non-finite entry");
      }
      return v;
    } catch (const TransportError& e) {
      last_error = e.what();
    } catch (const json::exception& e) {
      last_error = std::string("malformed embedding reply: ") + e.what();
    }
    if (attempt < attempts && options_.backoff_base.count() > 0) {
      std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
    }
  }
  throw EmbedError("embedding request failed after " + std::to_string(attempts) +
                   " attempts: " + last_error);
}

std::unique_ptr<Embedder> make_embedder(std::string_view name) {
  if (name.empty() || name == "hashing" || name == HashingEmbedder::kTag) {
    return std::make_unique<HashingEmbedder>();
  }
  if (name == "http") {
    HttpEmbedderOptions options;
    options.base_url = env_or_empty("SKBF_EMBED_BASE_URL");
    options.model = env_or_empty("SKBF_EMBED_MODEL");
    options.api_key = env_or_empty("SKBF_LLM_API_KEY");
    return std::make_unique<HttpEmbedder>(std::move(options));
  }
  throw ConfigError("unknown embedder '" + std::string(name) + "' (expected hashing or http)");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: dimensions " + std::to_string(a.size()) +
                                " and " + std::to_string(b.size()) + " differ");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw SimilarityUndefinedError("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// EmbeddingIndex

EmbeddingIndex::EmbeddingIndex(std::string embedder_tag, std::size_t dimension)
    : tag_(std::move(embedder_tag)), dimension_(dimension) {
  if (tag_.empty()) throw std::invalid_argument("embedding index needs an embedder tag");
}

void EmbeddingIndex::put(const NodeId& node, EmbeddingVector vector, std::string content_hash) {
  if (dimension_ == 0) dimension_ = vector.size();
  if (vector.size() != dimension_) {
    throw std::invalid_argument("vector for '" + node.str() + "' has dimension " +
                                std::to_string(vector.size()) + ", index expects " +
                                std::to_string(dimension_));
  }
  entries_.insert_or_assign(node, Entry{std::move(vector), std::move(content_hash)});
}

const EmbeddingVector* EmbeddingIndex::find(const NodeId& node) const {
  auto it = entries_.find(node);
  return it == entries_.end() ? nullptr : &it->second.vector;
}

const EmbeddingVector& EmbeddingIndex::at(const NodeId& node) const {
  if (const auto* v = find(node)) return *v;
  throw IndexMissError(node.str());
}

const std::string* EmbeddingIndex::content_hash(const NodeId& node) const {
  auto it = entries_.find(node);
  return it == entries_.end() ? nullptr : &it->second.content_hash;
}

std::string document_hash(std::string_view document) { return detail::sha256_hex(document); }

EmbeddingIndex EmbeddingIndex::build(const SemiStructuredKB& skb, Embedder& embedder,
                                     const EmbeddingIndex* cache, std::size_t* reused) {
  EmbeddingIndex index(embedder.tag(), embedder.dimension());
  const bool cache_usable = cache != nullptr && cache->embedder_tag() == index.tag_;
  std::size_t hits = 0;
  for (NodeIndex v : skb.all_candidate_indices()) {
    const NodeId& id = skb.node(v).id;
    const std::string doc = skb.document_of(v);
    std::string hash = document_hash(doc);
    if (cache_usable) {
      if (const auto* cached_hash = cache->content_hash(id); cached_hash && *cached_hash == hash) {
        index.put(id, *cache->find(id), std::move(hash));
        ++hits;
        continue;
      }
    }
    index.put(id, embedder.embed(doc), std::move(hash));
  }
  if (reused) *reused = hits;
  return index;
}

void EmbeddingIndex::save(const std::string& path) const {
  std::ostringstream out;
  out << json{{"format", "skbf-embeddings"},
              {"version", kFormatVersion},
              {"embedder_tag", tag_},
              {"dimension", dimension_}}
             .dump()
      << "\n";
  for (const auto& [id, entry] : entries_) {
    out << json{{"node_id", id.str()},
                {"embedder_tag", tag_},
                {"content_hash", entry.content_hash},
                {"vector", entry.vector}}
               .dump()
        << "\n";
  }
  io::write_file_atomic(path, out.str());
}

EmbeddingIndex EmbeddingIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding index " + path);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> IoError {
    return IoError(path + " line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) throw IoError("embedding index " + path + " is empty");
  ++line_no;
  std::optional<EmbeddingIndex> index;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "skbf-embeddings") throw fail("not an skbf embedding index");
    if (header.value("version", 0) != kFormatVersion) {
      throw fail("unsupported embedding index version " + header.value("version", json()).dump());
    }
    index.emplace(header.at("embedder_tag").get<std::string>(),
                  header.at("dimension").get<std::size_t>());
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json r = json::parse(line);
      if (r.at("embedder_tag").get<std::string>() != index->tag_)
        throw fail("embedder tag mismatch");
      index->put(NodeId(r.at("node_id").get<std::string>()), r.at("vector").get<EmbeddingVector>(),
                 r.value("content_hash", ""));
    } catch (const json::exception& e) {
      throw fail(e.what());
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
  }
  return std::move(*index);
}

// Ranking

void sort_by_score(std::vector<ScoredNode>& nodes) {
  std::sort(nodes.begin(), nodes.end(), [](const ScoredNode& a, const ScoredNode& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
}

VssResult vss_rank(const EmbeddingIndex& index, const EmbeddingVector& query,
                   const NodeSet& filtered, const NodeSet& pool, std::size_t k_max) {
  if (k_max == 0) throw std::invalid_argument("k_max must be at least 1");
  auto score_all = [&](auto&& nodes, auto&& keep) {
    std::vector<ScoredNode> out;
    for (const NodeId& id : nodes) {
      if (!keep(id)) continue;
      out.push_back(ScoredNode{id, cosine_similarity(query, index.at(id))});
    }
    sort_by_score(out);
    return out;
  };

  VssResult result;
  result.filtered = score_all(filtered, [](const NodeId&) { return true; });
  if (result.filtered.size() > k_max) {
    result.filtered.erase(result.filtered.begin() + static_cast<std::ptrdiff_t>(k_max),
                          result.filtered.end());
  }
  const std::size_t room = k_max - result.filtered.size();
  if (room > 0) {
    result.additional = score_all(pool, [&](const NodeId& id) { return !filtered.contains(id); });
    if (result.additional.size() > room) {
      result.additional.erase(result.additional.begin() + static_cast<std::ptrdiff_t>(room),
                              result.additional.end());
    }
  }
  return result;
}

VssResult vss_rank(const EmbeddingIndex& index, Embedder& embedder, std::string_view query,
                   const NodeSet& filtered, const NodeSet& pool, std::size_t k_max) {
  if (query.empty()) throw std::invalid_argument("empty query");
  return vss_rank(index, embedder.embed(query), filtered, pool, k_max);
}

}  // namespace skbf
