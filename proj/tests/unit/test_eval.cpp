#include <unistd.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "pipeline_fixture.hpp"
#include "skbf/errors.hpp"
#include "skbf/eval.hpp"
#include "skbf/io.hpp"

namespace skbf {
namespace {

std::vector<NodeId> ranked(std::initializer_list<const char*> names) {
  std::vector<NodeId> out;
  for (const char* n : names) out.emplace_back(n);
  return out;
}

NodeSet gold(std::initializer_list<const char*> names) {
  NodeSet out;
  for (const char* n : names) out.insert(NodeId(n));
  return out;
}

TEST(Metrics, HitAtK) {
  EXPECT_EQ(hit_at_k(ranked({"a", "b"}), gold({"a"}), 1), 1.0);
  EXPECT_EQ(hit_at_k(ranked({"b", "a"}), gold({"a"}), 1), 0.0);
  EXPECT_EQ(hit_at_k(ranked({"b", "a"}), gold({"a"}), 5), 1.0);
  EXPECT_EQ(hit_at_k({}, gold({"a"}), 5), 0.0);
  EXPECT_THROW((void)hit_at_k(ranked({"a"}), gold({"a"}), 0), std::invalid_argument);
}

TEST(Metrics, RecallUsesCappedDenominator) {
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"a", "x", "b"}), gold({"a", "b", "c"}), 20), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"a", "x", "b"}), gold({"a", "b", "c"}), 2), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"a", "a"}), gold({"a", "b"}), 20), 0.5);
  EXPECT_THROW((void)recall_at_k(ranked({"a"}), gold({"a"}), 0), std::invalid_argument);
  EXPECT_THROW((void)recall_at_k(ranked({"a"}), NodeSet{}, 1), std::invalid_argument);
}

TEST(Metrics, ReciprocalRank) {
  EXPECT_DOUBLE_EQ(mrr(ranked({"x", "y", "a"}), gold({"a"})), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mrr(ranked({"x"}), gold({"a"})), 0.0);
  QueryResult q1{"1", "s", Metrics{1, 1, 1, 1, 1.0}, {}, "none", ""};
  QueryResult q2{"2", "s", Metrics{1, 0, 1, 1, 0.5}, {}, "none", ""};
  EXPECT_DOUBLE_EQ(aggregate({q1, q2}).overall.mrr, 0.75);
}

TEST(Metrics, AggregatePerSplit) {
  std::vector<QueryResult> rows;
  for (int i = 0; i < 4; ++i) {
    rows.push_back({"q" + std::to_string(i),
                    i < 2 ? "human" : "synthetic",
                    Metrics{1, 1, 1, 1, 1},
                    {},
                    "none",
                    ""});
  }
  rows[3].metrics = Metrics{1, 0, 0, 0, 0};
  rows[3].error = "pipeline: boom";
  const auto r = aggregate(rows);
  EXPECT_DOUBLE_EQ(r.overall.hit_at_1, 0.75);
  EXPECT_DOUBLE_EQ(r.splits.at("human").hit_at_1, 1.0);
  EXPECT_DOUBLE_EQ(r.splits.at("synthetic").hit_at_1, 0.5);
  EXPECT_EQ(r.overall.queries, 4u);
  EXPECT_EQ(report_csv(r),
            "split,queries,hit@1,hit@5,recall@20,mrr\n"
            "human,2,1.000000,1.000000,1.000000,1.000000\n"
            "synthetic,2,0.500000,0.500000,0.500000,0.500000\n"
            "overall,4,0.750000,0.750000,0.750000,0.750000\n");
  const auto j = report_json(r);
  EXPECT_EQ(j.at("queries").size(), 4u);
  EXPECT_EQ(j.at("queries")[3].at("error"), "pipeline: boom");
}

TEST(Metrics, RandomRankingsAreConsistent) {
  std::mt19937_64 rng(23);
  for (int round = 0; round < 1000; ++round) {
    std::vector<NodeId> r;
    NodeSet g;
    const auto n = rng() % 30;
    for (std::size_t i = 0; i < n; ++i) r.emplace_back("c" + std::to_string(rng() % 40));
    const auto gn = 1 + rng() % 5;
    for (std::size_t i = 0; i < gn; ++i) g.insert(NodeId("c" + std::to_string(rng() % 40)));
    const auto m = score_ranking(r, g);
    EXPECT_LE(m.hit_at_1, m.mrr);
    EXPECT_LE(m.hit_at_1, m.hit_at_5);
    EXPECT_LE(m.mrr, m.hit_at_5 + (m.hit_at_5 == 0.0 ? 1.0 / 6.0 : 0.0));
    EXPECT_GE(m.recall_at_20, 0.0);
    EXPECT_LE(m.recall_at_20, 1.0);
    if (m.hit_at_5 == 0.0) {
      EXPECT_LE(m.mrr, 1.0 / 6.0);
    }
  }
}

std::string dataset_error(const std::string& text, const SemiStructuredKB* skb = nullptr) {
  std::istringstream in(text);
  try {
    (void)parse_dataset(in, skb);
  } catch (const DatasetError& e) {
    return e.what();
  }
  return "";
}

TEST(Dataset, ValidationErrors) {
  const auto skb = testing::load_desk();
  const std::string ok = R"({"id": "a", "query": "q", "answer_ids": ["n1"]})";
  EXPECT_EQ(dataset_error(ok, &skb), "");
  EXPECT_NE(dataset_error(ok + "\n" + ok).find("line 2: duplicate"), std::string::npos);
  EXPECT_NE(dataset_error("{").find("line 1"), std::string::npos);
  EXPECT_FALSE(dataset_error(R"({"id": "a", "query": "", "answer_ids": ["n1"]})").empty());
  EXPECT_FALSE(dataset_error(R"({"id": "a", "query": "q", "answer_ids": []})").empty());
  EXPECT_NE(dataset_error(R"({"id": "a", "query": "q", "answer_ids": ["n99"]})", &skb).find("n99"),
            std::string::npos);
}

TEST(Dataset, NumericIdsAndDefaultSplit) {
  std::istringstream in(R"({"id": 7, "query": "q", "answer_ids": [12]})");
  const auto d = parse_dataset(in);
  EXPECT_EQ(d.at(0).id, "7");
  EXPECT_EQ(d.at(0).split, "default");
  EXPECT_TRUE(d.at(0).gold.contains(NodeId("12")));
}

TEST(Sampling, DeterministicSubsetInInputOrder) {
  const auto skb = testing::load_desk();
  const auto data = testing::load_desk_dataset(skb);
  const auto a = sample_dataset(data, 0.25, 42);
  const auto b = sample_dataset(data, 0.25, 42);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a[i - 1].id, a[i].id);
  EXPECT_EQ(sample_dataset(data, 1.0, 0).size(), data.size());
  EXPECT_THROW((void)sample_dataset(data, 0.0, 0), std::invalid_argument);
}

using testing::DeskPipeline;

TEST_F(DeskPipeline, FixtureScoresPerfectly) {
  const auto report =
      evaluate(Retrieval{skb, index, embedder}, *gateway, PipelineConfig{}, dataset);
  EXPECT_EQ(report.overall.queries, 20u);
  EXPECT_DOUBLE_EQ(report.overall.hit_at_1, 1.0);
  EXPECT_DOUBLE_EQ(report.overall.mrr, 1.0);
  EXPECT_EQ(report.splits.size(), 2u);
}

TEST_F(DeskPipeline, ParallelEvaluationMatchesSerial) {
  EvalOptions parallel;
  parallel.parallel = 4;
  const Retrieval r{skb, index, embedder};
  EXPECT_EQ(report_csv(evaluate(r, *gateway, PipelineConfig{}, dataset)),
            report_csv(evaluate(r, *gateway, PipelineConfig{}, dataset, parallel)));
}

TEST_F(DeskPipeline, FailedQueriesScoreZero) {
  PipelineConfig config;
  config.fallback = FallbackPolicy::Fail;
  auto data = dataset;
  data.resize(4);
  script_extraction(data[3].query, "garbage");
  const auto report = evaluate(Retrieval{skb, index, embedder}, *gateway, config, data);
  EXPECT_DOUBLE_EQ(report.overall.hit_at_1, 0.75);
  EXPECT_EQ(report.rows[3].error.rfind("pipeline: ", 0), 0u);
}

TEST_F(DeskPipeline, TracesWrittenPerQuery) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("skbf_traces_" + std::to_string(::getpid()));
  EvalOptions options;
  options.trace_dir = dir.string();
  auto data = dataset;
  data.resize(2);
  (void)evaluate(Retrieval{skb, index, embedder}, *gateway, PipelineConfig{}, data, options);
  EXPECT_EQ(parse_trace(io::read_file((dir / "q01.json").string())).query, data[0].query);
  EXPECT_TRUE(fs::exists(dir / "q02.json"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace skbf
