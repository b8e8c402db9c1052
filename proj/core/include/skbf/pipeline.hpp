#pragma once

#include <string_view>

#include "skbf/config.hpp"
#include "skbf/llm_gateway.hpp"
#include "skbf/reranker.hpp"
#include "skbf/skb.hpp"
#include "skbf/trace.hpp"
#include "skbf/vector_search.hpp"

namespace skbf {

struct Answer {
  RankedAnswers answers;
  AnswerTrace trace;
};

/// Shared, read-only inputs of answer(). The SKB and index must outlive it;
/// the embedder must tolerate concurrent calls when queries run in parallel.
struct Retrieval {
  const SemiStructuredKB& skb;
  const EmbeddingIndex& index;
  Embedder& embedder;
};

/// Answers one query in four steps: triplet extraction, candidate filtering,
/// VSS and LLM reranking.
///
/// Extraction is retried once with a corrective suffix. When extraction,
/// grounding or propagation yields no usable candidate set, the query is
/// answered by VSS + reranking over the whole candidate pool and the reason
/// is recorded in the trace (unless config.fallback is Fail, in which case
/// the error propagates). If the reranker cannot reach the LLM at all the
/// VSS order is returned. Throws std::invalid_argument for an empty query
/// and ReplayMissError when a replayed transcript lacks a request.
[[nodiscard]] Answer answer(const Retrieval& retrieval, LLMGateway& gateway,
                            const PipelineConfig& config, std::string_view query);

}  // namespace skbf
