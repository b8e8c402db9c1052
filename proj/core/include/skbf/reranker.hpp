#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skbf/llm_gateway.hpp"
#include "skbf/skb.hpp"
#include "skbf/vector_search.hpp"

namespace skbf {

inline constexpr std::string_view kRerankPromptVersion = "rerank-prompt v1";
inline constexpr std::string_view kTruncationMarker = "…[truncated]";

enum class Block { Filtered, Additional };

std::string_view to_string(Block b) noexcept;

struct RerankEntry {
  NodeId node;
  Block block = Block::Filtered;
  double vss_score = 0.0;
  std::optional<double> llm_score;  // nullopt: Unscored, ordered as 0.0
  std::string rationale;            // raw reply, or the gateway error message
  friend bool operator==(const RerankEntry&, const RerankEntry&) = default;
};

struct RankedAnswers {
  std::string query;
  std::vector<RerankEntry> entries;
  friend bool operator==(const RankedAnswers&, const RankedAnswers&) = default;
};

struct RerankOptions {
  bool strict_blocks = true;
  std::size_t background_budget = 4000;  // bytes of background text per prompt
  std::size_t parallelism = 1;
};

/// User prompt asking for a single relevance score in [0, 1]. Background
/// longer than `budget` bytes is cut at a UTF-8 boundary and marked.
[[nodiscard]] std::string build_rerank_prompt(
    std::string_view query, std::string_view candidate_name, std::string_view background,
    std::size_t budget = RerankOptions{}.background_budget);

[[nodiscard]] std::string_view rerank_system_prompt() noexcept;

/// Accepts a decimal in [0, 1] with optional surrounding whitespace
/// ("1", "0.25", ".5", "1.0"). Anything else yields nullopt.
[[nodiscard]] std::optional<double> parse_score(std::string_view reply);

/// Final ordering. With strict blocks every Filtered entry precedes every
/// Additional one; within a block: llm score (Unscored = 0) descending, then
/// vss score descending, then NodeId ascending.
void order_entries(std::vector<RerankEntry>& entries, bool strict_blocks);

/// Scores every candidate with one LLM call and orders the result. A gateway
/// failure leaves that candidate Unscored. Throws RerankUnavailableError when
/// every call fails, std::invalid_argument when the inputs exceed `k_max`.
/// A ReplayMissError is rethrown: the transcript does not match this run.
[[nodiscard]] RankedAnswers rerank(const SemiStructuredKB& skb, LLMGateway& gateway,
                                   std::string_view query, const std::vector<ScoredNode>& filtered,
                                   const std::vector<ScoredNode>& additional, std::size_t k_max,
                                   const RerankOptions& options = {});

/// The answer list without LLM scores, in VSS order: filtered then additional.
[[nodiscard]] RankedAnswers vss_order(std::string_view query,
                                      const std::vector<ScoredNode>& filtered,
                                      const std::vector<ScoredNode>& additional);

}  // namespace skbf
