#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skbf/pipeline.hpp"

namespace skbf {

struct QARecord {
  std::string id;
  std::string query;
  NodeSet gold;  // non-empty
  std::string split;
};

/// JSON Lines of {id, query, answer_ids, split}. With `skb`, every gold id
/// must name a candidate node. Throws DatasetError with the line number;
/// duplicate ids are rejected.
[[nodiscard]] std::vector<QARecord> load_dataset(const std::string& path,
                                                 const SemiStructuredKB* skb = nullptr);
[[nodiscard]] std::vector<QARecord> parse_dataset(std::istream& in,
                                                  const SemiStructuredKB* skb = nullptr);

/// 1 when one of the first `k` ranked nodes is gold. Throws
/// std::invalid_argument for k = 0.
[[nodiscard]] double hit_at_k(std::span<const NodeId> ranked, const NodeSet& gold, std::size_t k);
/// |top-k ∩ gold| / min(|gold|, k). Throws std::invalid_argument for k = 0
/// or empty gold.
[[nodiscard]] double recall_at_k(std::span<const NodeId> ranked, const NodeSet& gold,
                                 std::size_t k);
/// 1 / rank of the first gold node, 0 when none is ranked.
[[nodiscard]] double mrr(std::span<const NodeId> ranked, const NodeSet& gold);

struct Metrics {
  std::size_t queries = 0;
  double hit_at_1 = 0.0;
  double hit_at_5 = 0.0;
  double recall_at_20 = 0.0;
  double mrr = 0.0;
};

struct QueryResult {
  std::string id;
  std::string split;
  Metrics metrics;  // queries == 1
  std::vector<NodeId> ranked;
  std::string fallback;  // fallback reason, "none" when the prefilter held
  std::string error;     // non-empty when answer() threw; metrics are then zero
};

struct MetricReport {
  Metrics overall;
  std::map<std::string, Metrics> splits;
  std::vector<QueryResult> rows;  // sorted by id
};

[[nodiscard]] Metrics score_ranking(std::span<const NodeId> ranked, const NodeSet& gold);

/// Means over `rows`, overall and per split.
[[nodiscard]] MetricReport aggregate(std::vector<QueryResult> rows);

struct EvalOptions {
  std::size_t parallel = 1;
  double sample_fraction = 1.0;  // in (0, 1]
  std::uint64_t seed = 0;
  std::string trace_dir;  // one `<id>.json` trace per query when non-empty
  bool trace_timings = true;
};

/// Deterministic subset of round(fraction * n) records (at least one),
/// chosen by a seeded hash of each id and returned in input order.
[[nodiscard]] std::vector<QARecord> sample_dataset(const std::vector<QARecord>& dataset,
                                                   double fraction, std::uint64_t seed);

/// Runs answer() for every record, `options.parallel` at a time. A failing
/// query scores zero on every metric and keeps its error message.
/// Throws std::invalid_argument for an empty dataset.
[[nodiscard]] MetricReport evaluate(const Retrieval& retrieval, LLMGateway& gateway,
                                    const PipelineConfig& config,
                                    const std::vector<QARecord>& dataset,
                                    const EvalOptions& options = {});

/// One row per split plus "overall": split,queries,hit@1,hit@5,recall@20,mrr.
[[nodiscard]] std::string report_csv(const MetricReport& report);
[[nodiscard]] nlohmann::json report_json(const MetricReport& report);

}  // namespace skbf
