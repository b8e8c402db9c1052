#include <gtest/gtest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "desk.hpp"
#include "skbf/errors.hpp"
#include "skbf/vector_search.hpp"

namespace skbf {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("skbf_vs_" + std::to_string(::getpid()) + "_" + name);
}

TEST(Cosine, BasicAngles) {
  const std::vector<double> x{1, 0}, y{0, 1}, d{1, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
  EXPECT_NEAR(cosine_similarity(d, x), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, std::vector<double>{-2, 0}), -1.0);
}

TEST(Cosine, UndefinedAndMismatched) {
  const std::vector<double> x{1, 0}, z{0, 0};
  EXPECT_THROW((void)cosine_similarity(x, z), SimilarityUndefinedError);
  EXPECT_THROW((void)cosine_similarity(x, std::vector<double>{1, 0, 0}), std::invalid_argument);
}

TEST(Cosine, SelfSimilarityAndBounds) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int round = 0; round < 1000; ++round) {
    std::vector<double> a(1 + rng() % 40), b(a.size());
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-9);
    const double c = cosine_similarity(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_DOUBLE_EQ(c, cosine_similarity(b, a));
  }
}

// Values below come from an independent Python implementation of the
// hashing embedder (tests/oracles/hashing_vss.py).
TEST(HashingEmbedder, MatchesReferenceBuckets) {
  HashingEmbedder e;
  const auto ab = e.embed("alpha beta");
  EXPECT_EQ(HashingEmbedder::bucket_of("alpha"), 43u);
  EXPECT_EQ(HashingEmbedder::bucket_of("beta"), 167u);
  EXPECT_DOUBLE_EQ(ab[43], 0.7071067811865475);
  EXPECT_DOUBLE_EQ(ab[167], 0.7071067811865475);
  const auto gg = e.embed("Graph, GRAPH!");
  EXPECT_DOUBLE_EQ(gg[135], 1.0);
  EXPECT_EQ(gg.size(), HashingEmbedder::kDimension);
}

TEST(HashingEmbedder, RejectsEmptyAndTokenlessText) {
  HashingEmbedder e;
  EXPECT_THROW((void)e.embed(""), std::invalid_argument);
  EXPECT_THROW((void)e.embed("  ?! ..."), EmbedError);
}

TEST(HashingEmbedder, DeskQueryScores) {
  const auto skb = testing::load_desk();
  HashingEmbedder e;
  const auto index = EmbeddingIndex::build(skb, e);
  const auto q = e.embed("Which papers did Alice Smith write?");
  const std::pair<const char*, double> want[] = {{"n1", 0.0700140042014005},
                                                 {"n2", 0.3651483716701108},
                                                 {"n3", 0.0},
                                                 {"n4", 0.0},
                                                 {"n5", 0.18731716231633883}};
  for (const auto& [id, score] : want) {
    EXPECT_NEAR(cosine_similarity(q, index.at(NodeId(id))), score, 1e-12) << id;
  }
}

TEST(VssRank, BackfillsFromPool) {
  const auto skb = testing::load_desk();
  HashingEmbedder e;
  const auto index = EmbeddingIndex::build(skb, e);
  const auto r = vss_rank(index, e, "Which papers did Alice Smith write?", {NodeId("n1")},
                          skb.candidate_pool(), 3);
  ASSERT_EQ(r.filtered.size(), 1u);
  EXPECT_EQ(r.filtered[0].node, NodeId("n1"));
  ASSERT_EQ(r.additional.size(), 2u);
  EXPECT_EQ(r.additional[0].node, NodeId("n2"));
  EXPECT_EQ(r.additional[1].node, NodeId("n5"));
}

TEST(VssRank, TruncatesFilteredToKMax) {
  EmbeddingIndex index("t", 2);
  NodeSet filtered;
  for (int i = 0; i < 25; ++i) {
    const NodeId id("f" + std::to_string(100 + i));
    index.put(id, {1.0, static_cast<double>(i)}, "h");
    filtered.insert(id);
  }
  const auto r = vss_rank(index, EmbeddingVector{1.0, 0.0}, filtered, filtered, 20);
  EXPECT_EQ(r.filtered.size(), 20u);
  EXPECT_TRUE(r.additional.empty());
  EXPECT_EQ(r.filtered.front().node, NodeId("f100"));
  EXPECT_THROW((void)vss_rank(index, EmbeddingVector{1.0, 0.0}, filtered, filtered, 0),
               std::invalid_argument);
}

TEST(VssRank, MissingVectorThrows) {
  EmbeddingIndex index("t", 2);
  index.put(NodeId("a"), {1.0, 0.0}, "h");
  EXPECT_THROW((void)vss_rank(index, EmbeddingVector{1.0, 0.0}, {NodeId("b")}, {NodeId("a")}, 5),
               IndexMissError);
}

TEST(VssRank, RandomSetsRespectBounds) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int round = 0; round < 300; ++round) {
    EmbeddingIndex index("t", 3);
    NodeSet pool, filtered;
    const auto n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      const NodeId id("x" + std::to_string(i));
      index.put(id, {u(rng), u(rng), 0.5}, "h");
      pool.insert(id);
      if (rng() % 3 == 0) filtered.insert(id);
    }
    const std::size_t k = 1 + rng() % 25;
    const EmbeddingVector q{u(rng), u(rng), u(rng) + 2.0};
    const auto r = vss_rank(index, q, filtered, pool, k);
    EXPECT_EQ(r.filtered.size(), std::min(k, filtered.size()));
    EXPECT_EQ(r.filtered.size() + r.additional.size(), std::min(k, pool.size()));
    for (const auto& s : r.additional) EXPECT_FALSE(filtered.contains(s.node));
    for (const auto* list : {&r.filtered, &r.additional}) {
      for (std::size_t i = 1; i < list->size(); ++i)
        EXPECT_GE((*list)[i - 1].score, (*list)[i].score);
    }
    EXPECT_EQ(r.filtered, vss_rank(index, q, filtered, pool, k).filtered);
  }
}

TEST(EmbeddingIndex, SaveLoadRoundTrip) {
  const auto skb = testing::load_desk();
  HashingEmbedder e;
  const auto index = EmbeddingIndex::build(skb, e);
  const auto path = temp_path("index.jsonl");
  index.save(path.string());
  const auto loaded = EmbeddingIndex::load(path.string());
  EXPECT_EQ(loaded.embedder_tag(), "hashing-256-v1");
  EXPECT_EQ(loaded.size(), 5u);
  EXPECT_EQ(loaded.at(NodeId("n3")), index.at(NodeId("n3")));
  EXPECT_EQ(*loaded.content_hash(NodeId("n1")), document_hash(skb.document_of(NodeId("n1"))));
  fs::remove(path);
}

TEST(EmbeddingIndex, CacheReuseRequiresSameTagAndContent) {
  const auto skb = testing::load_desk();
  HashingEmbedder e;
  auto cache = EmbeddingIndex::build(skb, e);
  cache.put(NodeId("n1"), cache.at(NodeId("n1")), "stale");
  std::size_t reused = 0;
  const auto rebuilt = EmbeddingIndex::build(skb, e, &cache, &reused);
  EXPECT_EQ(reused, 4u);
  EXPECT_EQ(*rebuilt.content_hash(NodeId("n1")), document_hash(skb.document_of(NodeId("n1"))));

  EmbeddingIndex other_tag("other", HashingEmbedder::kDimension);
  (void)EmbeddingIndex::build(skb, e, &other_tag, &reused);
  EXPECT_EQ(reused, 0u);
}

TEST(EmbeddingIndex, RejectsForeignFiles) {
  const auto path = temp_path("bad.jsonl");
  {
    std::ofstream(path) << "{\"format\":\"something-else\"}\n";
  }
  EXPECT_THROW((void)EmbeddingIndex::load(path.string()), IoError);
  fs::remove(path);
  EXPECT_THROW((void)EmbeddingIndex::load(path.string()), IoError);
  EmbeddingIndex index("t", 2);
  EXPECT_THROW(index.put(NodeId("a"), {1.0}, "h"), std::invalid_argument);
}

TEST(MakeEmbedder, KnownNames) {
  EXPECT_EQ(make_embedder("hashing")->tag(), "hashing-256-v1");
  EXPECT_THROW((void)make_embedder("word2vec"), ConfigError);
}

TEST(HttpEmbedder, ReadsFirstEmbedding) {
  httplib::Server server;
  nlohmann::json seen;
  server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    res.set_content(R"({"data":[{"embedding":[0.5, 0.25, 0.0]}]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::jthread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpEmbedderOptions opts;
  opts.base_url = "http://127.0.0.1:" + std::to_string(port);
  opts.model = "emb";
  opts.backoff_base = 0ms;
  HttpEmbedder e(opts);
  EXPECT_EQ(e.embed("hello"), (EmbeddingVector{0.5, 0.25, 0.0}));
  EXPECT_EQ(e.dimension(), 3u);
  EXPECT_EQ(e.tag(), "http:emb");
  EXPECT_EQ(seen["input"], "hello");
  EXPECT_EQ(seen["model"], "emb");
  server.stop();
}

}  // namespace
}  // namespace skbf
