#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skbf/candidate_filter.hpp"
#include "skbf/reranker.hpp"
#include "skbf/triplet.hpp"
#include "skbf/vector_search.hpp"

namespace skbf {

inline constexpr std::string_view kTraceVersion = "trace v1";

/// Why answer() skipped the prefilter result, if it did.
enum class FallbackReason {
  None,
  PrefilterDisabled,
  ExtractionFailed,       // two unparsable replies
  ExtractionUnavailable,  // the gateway could not deliver a reply
  EmptyPreparation,
  UnconstrainedTarget,
  EmptyFilter,
};

std::string_view to_string(FallbackReason r) noexcept;
FallbackReason parse_fallback_reason(std::string_view s);

struct StepTimings {
  double extraction_ms = 0.0;
  double filter_ms = 0.0;
  double vss_ms = 0.0;
  double rerank_ms = 0.0;
  double total_ms = 0.0;
  friend bool operator==(const StepTimings&, const StepTimings&) = default;
};

/// Everything answer() saw and decided for one query.
struct AnswerTrace {
  std::string query;
  std::size_t k_max = 0;
  std::string embedder_tag;
  std::string llm_model;

  std::vector<std::string> extraction_replies;  // one per attempt
  std::vector<std::string> extraction_errors;   // parse or gateway error per failed attempt
  std::vector<ParseNote> parse_notes;
  std::optional<TripletSet> triplets;

  std::vector<GroundedTriplet> grounded;
  FilterTrace filter;
  std::optional<NodeSet> filtered;  // set when substitution ran

  FallbackReason fallback = FallbackReason::None;
  std::string fallback_detail;

  VssResult vss;
  bool rerank_unavailable = false;
  std::string rerank_error;
  std::vector<RerankEntry> ranking;

  StepTimings timings;
};

struct TraceWriteOptions {
  bool include_timings = true;
  int indent = 2;  // negative: single line
};

[[nodiscard]] nlohmann::json trace_to_json(const AnswerTrace& trace, bool include_timings = true);
/// Throws IoError for documents that are not `trace v1`.
[[nodiscard]] AnswerTrace trace_from_json(const nlohmann::json& doc);

[[nodiscard]] std::string serialize_trace(const AnswerTrace& trace,
                                          const TraceWriteOptions& options = {});
[[nodiscard]] AnswerTrace parse_trace(std::string_view text);

/// Plain-language account of the answer: grounded constraints, the graph
/// edges that support them, the fallback (if any) and the ranked list.
/// Node names come from `skb` when given, otherwise ids are shown.
[[nodiscard]] std::string render_summary(const AnswerTrace& trace,
                                         const SemiStructuredKB* skb = nullptr);

}  // namespace skbf
