#pragma once

#include <gtest/gtest.h>

#include <memory>

#include "desk.hpp"
#include "skbf/pipeline.hpp"

namespace skbf::testing {

/// Desk KB, hashing index and a gateway over a scripted provider that falls
/// back to DeskLLM for anything not scripted explicitly.
class DeskPipeline : public ::testing::Test {
 protected:
  DeskPipeline()
      : skb(load_desk()),
        dataset(load_desk_dataset(skb)),
        index(EmbeddingIndex::build(skb, embedder)),
        provider(DeskLLM(skb, dataset)) {
    GatewayOptions o;
    o.backoff_base = std::chrono::milliseconds(0);
    gateway = std::make_unique<LLMGateway>(provider, o);
  }

  Answer run(std::string_view query, const PipelineConfig& config = {}) {
    return answer(Retrieval{skb, index, embedder}, *gateway, config, query);
  }

  /// Scripts the extraction reply for `query` on every attempt.
  void script_extraction(std::string_view query, const std::string& reply) {
    ChatRequest req;
    req.system = std::string(extraction_system_prompt());
    req.user = build_extraction_prompt(query, skb.schema());
    provider.script(req, reply);
    req.user += extraction_retry_suffix();
    provider.script(req, reply);
  }

  static std::vector<NodeId> order_of(const Answer& a) {
    std::vector<NodeId> out;
    for (const auto& e : a.answers.entries) out.push_back(e.node);
    return out;
  }

  SemiStructuredKB skb;
  std::vector<QARecord> dataset;
  HashingEmbedder embedder;
  EmbeddingIndex index;
  ScriptedProvider provider;
  std::unique_ptr<LLMGateway> gateway;
};

}  // namespace skbf::testing
