#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skbf/skb.hpp"

namespace skbf {

using EmbeddingVector = std::vector<double>;

/// Text to dense vector. Implementations must be deterministic for a fixed
/// tag: the tag keys the embedding cache.
class Embedder {
 public:
  virtual ~Embedder() = default;
  [[nodiscard]] virtual std::string tag() const = 0;
  [[nodiscard]] virtual std::size_t dimension() const = 0;
  /// Throws EmbedError; std::invalid_argument for empty text.
  virtual EmbeddingVector embed(std::string_view text) = 0;
};

/// Offline test embedder: tokens are maximal runs of ASCII letters/digits
/// (bytes >= 0x80 count as letters), lowercased, hashed with 64-bit FNV-1a
/// into 256 buckets, counted, then L2-normalized.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDimension = 256;
  static constexpr std::string_view kTag = "hashing-256-v1";

  [[nodiscard]] std::string tag() const override { return std::string(kTag); }
  [[nodiscard]] std::size_t dimension() const override { return kDimension; }
  EmbeddingVector embed(std::string_view text) override;

  [[nodiscard]] static std::size_t bucket_of(std::string_view token) noexcept;
};

struct HttpEmbedderOptions {
  std::string base_url;
  std::string path = "/v1/embeddings";
  std::string api_key;
  std::string model;
  std::size_t dimension = 0;  // 0: learn from the first reply
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::seconds timeout{60};
};

/// Generic embeddings HTTP contract: POST {model, input} and read
/// data[0].embedding. Failed attempts are retried twice, then EmbedError.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpEmbedderOptions options);
  [[nodiscard]] std::string tag() const override { return "http:" + options_.model; }
  [[nodiscard]] std::size_t dimension() const override { return dimension_.load(); }
  EmbeddingVector embed(std::string_view text) override;

 private:
  HttpEmbedderOptions options_;
  std::atomic<std::size_t> dimension_;
};

/// "hashing" (default) or a live embedder from SKBF_EMBED_BASE_URL,
/// SKBF_EMBED_MODEL and SKBF_LLM_API_KEY when name == "http".
std::unique_ptr<Embedder> make_embedder(std::string_view name);

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1]. Throws
/// SimilarityUndefinedError for a zero vector, std::invalid_argument for a
/// dimension mismatch.
[[nodiscard]] double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Candidate embeddings keyed by NodeId for one embedder.
class EmbeddingIndex {
 public:
  static constexpr int kFormatVersion = 1;

  EmbeddingIndex(std::string embedder_tag, std::size_t dimension);

  [[nodiscard]] const std::string& embedder_tag() const noexcept { return tag_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

  void put(const NodeId& node, EmbeddingVector vector, std::string content_hash);
  [[nodiscard]] const EmbeddingVector* find(const NodeId& node) const;
  /// Throws IndexMissError.
  [[nodiscard]] const EmbeddingVector& at(const NodeId& node) const;
  [[nodiscard]] const std::string* content_hash(const NodeId& node) const;

  /// Embeds document_of(v) for every candidate of `skb`. Entries of `cache`
  /// with the same embedder tag and content hash are reused instead of
  /// re-embedded. `reused`, when given, receives the number of cache hits.
  static EmbeddingIndex build(const SemiStructuredKB& skb, Embedder& embedder,
                              const EmbeddingIndex* cache = nullptr, std::size_t* reused = nullptr);

  /// JSON Lines: a header object, then one {node_id, embedder_tag,
  /// content_hash, vector} object per node. Written atomically.
  void save(const std::string& path) const;
  static EmbeddingIndex load(const std::string& path);

 private:
  struct Entry {
    EmbeddingVector vector;
    std::string content_hash;
  };
  std::string tag_;
  std::size_t dimension_;
  std::map<NodeId, Entry> entries_;
};

[[nodiscard]] std::string document_hash(std::string_view document);

struct ScoredNode {
  NodeId node;
  double score = 0.0;
  friend bool operator==(const ScoredNode&, const ScoredNode&) = default;
};

struct VssResult {
  std::vector<ScoredNode> filtered;    // VSS-sorted, at most k_max
  std::vector<ScoredNode> additional;  // backfill from the pool, disjoint from filtered
};

/// Orders `filtered` by cosine similarity to the query (descending, ties by
/// NodeId) and truncates it to `k_max`. When fewer than `k_max` remain, the
/// best-scoring pool members outside `filtered` fill the gap.
/// Throws IndexMissError for nodes absent from `index`.
[[nodiscard]] VssResult vss_rank(const EmbeddingIndex& index, Embedder& embedder,
                                 std::string_view query, const NodeSet& filtered,
                                 const NodeSet& pool, std::size_t k_max);

/// Same, with a precomputed query embedding.
[[nodiscard]] VssResult vss_rank(const EmbeddingIndex& index, const EmbeddingVector& query,
                                 const NodeSet& filtered, const NodeSet& pool, std::size_t k_max);

/// Descending score, ties broken by ascending NodeId.
void sort_by_score(std::vector<ScoredNode>& nodes);

}  // namespace skbf
