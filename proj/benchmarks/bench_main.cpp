#include <benchmark/benchmark.h>

#include <random>

#include "skbf/candidate_filter.hpp"
#include "skbf/vector_search.hpp"

namespace {

using namespace skbf;

// A layered graph: `n` authors each writing 4 of `n` papers, papers in one
// of 16 fields.
SemiStructuredKB layered_graph(std::size_t n) {
  std::mt19937_64 rng(1);
  SkbBuilder b;
  auto id = [](const char* p, std::size_t i) { return NodeId(p + std::to_string(i)); };
  for (std::size_t i = 0; i < n; ++i) {
    b.add_node(Node{id("a", i), "author", {"author " + std::to_string(i)}, std::nullopt, true});
    b.add_node(Node{id("p", i), "paper", {"paper " + std::to_string(i)}, std::nullopt, true});
  }
  for (std::size_t f = 0; f < 16; ++f) {
    b.add_node(Node{id("f", f), "field", {"field " + std::to_string(f)}, std::nullopt, true});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 4; ++k)
      b.add_edge(Edge{id("a", i), "writes", id("p", rng() % n), std::nullopt});
    b.add_edge(Edge{id("p", i), "in_field", id("f", rng() % 16), std::nullopt});
  }
  return std::move(b).build();
}

void BM_SubstituteChain(benchmark::State& state) {
  const auto skb = layered_graph(static_cast<std::size_t>(state.range(0)));
  const std::vector<GroundedTriplet> pattern{
      {Variable{"a", "author"}, "writes", Variable{"p", "paper"}},
      {Variable{"p", "paper"}, "in_field", grounded(NodeId("f3"))}};
  for (auto _ : state) {
    FilterTrace trace;
    benchmark::DoNotOptimize(substitute(skb, pattern, Variable{"a", "author"}, trace));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SubstituteChain)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_MatchAliasFuzzy(benchmark::State& state) {
  const auto skb = layered_graph(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(match_alias(skb, "authr 4217"));
}
BENCHMARK(BM_MatchAliasFuzzy)->Arg(1000)->Arg(10000);

void BM_VssRank(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  EmbeddingIndex index("bench", 256);
  NodeSet pool, filtered;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingVector v(256);
    for (auto& x : v) x = g(rng);
    const NodeId id("c" + std::to_string(i));
    index.put(id, std::move(v), "h");
    pool.insert(id);
    if (i % 50 == 0) filtered.insert(id);
  }
  EmbeddingVector q(256);
  for (auto& x : q) x = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(vss_rank(index, q, filtered, pool, 20));
}
BENCHMARK(BM_VssRank)->Arg(1000)->Arg(10000);

void BM_HashingEmbed(benchmark::State& state) {
  HashingEmbedder e;
  const std::string text =
      "Graph Reasoning Primer. A tutorial on multi-hop reasoning over knowledge graphs with path "
      "queries and graph embeddings.";
  for (auto _ : state) benchmark::DoNotOptimize(e.embed(text));
}
BENCHMARK(BM_HashingEmbed);

}  // namespace

BENCHMARK_MAIN();
