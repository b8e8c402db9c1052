#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <sstream>

#include "desk.hpp"
#include "skbf/cli.hpp"
#include "skbf/io.hpp"
#include "skbf/llm_gateway.hpp"
#include "skbf/trace.hpp"

namespace skbf {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    tmp = fs::temp_directory_path() /
          ("skbf_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(tmp);
  }
  void TearDown() override { fs::remove_all(tmp); }

  std::string desk() const { return testing::desk_dir(); }
  std::string fixture(const char* name) const { return (fs::path(desk()) / name).string(); }

  fs::path tmp;
};

TEST_F(CliTest, QueryReplaysWithoutNetwork) {
  const auto before = HttpChatProvider::requests_issued();
  const auto r =
      run_cli({"query", "--skb", desk(), "--replay", fixture("t1.jsonl"), "-q",
               "Which papers did Alice Smith write?", "--out", (tmp / "t.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("1\tn1\tAttention Basics\tfiltered", 0), 0u) << r.out;
  EXPECT_EQ(HttpChatProvider::requests_issued(), before);
  const auto trace = parse_trace(io::read_file((tmp / "t.json").string()));
  EXPECT_EQ(trace.ranking.at(0).node, NodeId("n1"));
}

TEST_F(CliTest, EvalReplaysAndWritesReports) {
  const auto csv = (tmp / "report.csv").string();
  const auto json = (tmp / "report.json").string();
  const auto r = run_cli({"eval", "--skb", desk(), "--dataset", fixture("qa.jsonl"), "--replay",
                          fixture("eval.jsonl"), "--out", csv, "--json-out", json, "--trace-dir",
                          (tmp / "traces").string(), "--parallel", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = io::read_file(csv);
  EXPECT_EQ(text.rfind("split,queries,hit@1,hit@5,recall@20,mrr\n", 0), 0u);
  EXPECT_NE(text.find("overall,20,1.000000"), std::string::npos) << text;
  EXPECT_EQ(r.out, text);
  EXPECT_TRUE(fs::exists(tmp / "traces" / "q20.json"));
  EXPECT_TRUE(fs::exists(json));
}

TEST_F(CliTest, MissingQuestionIsUsageError) {
  EXPECT_EQ(run_cli({"query", "--skb", desk(), "--replay", fixture("t1.jsonl")}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"query", "--skb", desk(), "-q", "x", "--replay", fixture("t1.jsonl"),
                     "--record", (tmp / "r.jsonl").string()})
                .code,
            cli::kExitUsage);
}

TEST_F(CliTest, ReplayMissIsRuntimeError) {
  const auto r =
      run_cli({"query", "--skb", desk(), "--replay", fixture("t1.jsonl"), "-q", "Something else?"});
  EXPECT_EQ(r.code, cli::kExitRuntime);
}

TEST_F(CliTest, BadSettingIsRuntimeErrorWithModule) {
  const auto r = run_cli(
      {"query", "--skb", desk(), "--replay", fixture("t1.jsonl"), "-q", "x", "--set", "k_max=0"});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_EQ(r.err.rfind("error [config]: ", 0), 0u) << r.err;
}

TEST_F(CliTest, IngestPrintsStatisticsAndCopies) {
  const auto r = run_cli({"ingest", "--skb", desk(), "--out", (tmp / "copy").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("nodes: 5\nedges: 4\n"), std::string::npos) << r.out;
  EXPECT_EQ(run_cli({"ingest", "--skb", (tmp / "copy").string()}).out.substr(0, 20),
            r.out.substr(0, 20));
}

TEST_F(CliTest, EmbedReusesCachedVectors) {
  const auto index = (tmp / "index.jsonl").string();
  auto r = run_cli({"embed", "--skb", desk(), "--out", index});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("embedded 5 candidates, reused 0"), std::string::npos) << r.out;
  r = run_cli({"embed", "--skb", desk(), "--out", index});
  EXPECT_NE(r.out.find("embedded 0 candidates, reused 5"), std::string::npos) << r.out;

  r = run_cli({"query", "--skb", desk(), "--index", index, "--replay", fixture("t1.jsonl"), "-q",
               "Which papers did Alice Smith write?", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_trace(r.out).ranking.at(0).node, NodeId("n1"));
}

TEST_F(CliTest, TraceShowRendersSummary) {
  const auto trace = (tmp / "t.json").string();
  ASSERT_EQ(run_cli({"query", "--skb", desk(), "--replay", fixture("t1.jsonl"), "-q",
                     "Which papers did Alice Smith write?", "--out", trace})
                .code,
            0);
  const auto r = run_cli({"trace-show", trace, "--skb", desk()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Alice Smith"), std::string::npos);
  const auto j = run_cli({"trace-show", trace, "--json"});
  EXPECT_EQ(j.out, io::read_file(trace));
}

}  // namespace
}  // namespace skbf
