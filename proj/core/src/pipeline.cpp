#include "skbf/pipeline.hpp"

#include <chrono>
#include <optional>
#include <stdexcept>

#include "skbf/candidate_filter.hpp"
#include "skbf/errors.hpp"
#include "skbf/triplet.hpp"

namespace skbf {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// A prefilter failure that answer() may absorb into the fallback path.
struct PrefilterFailure {
  FallbackReason reason;
  std::string detail;
};

std::optional<TripletSet> extract(const SemiStructuredKB& skb, LLMGateway& gateway,
                                  const PipelineConfig& config, std::string_view query,
                                  AnswerTrace& trace, std::optional<PrefilterFailure>& failure) {
  ChatRequest req;
  req.system = std::string(extraction_system_prompt());
  req.user = build_extraction_prompt(query, skb.schema());
  req.temperature = config.temperature;
  req.tag = "extraction";

  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) req.user += extraction_retry_suffix();
    std::string reply;
    try {
      reply = gateway.complete(req);
    } catch (const ReplayMissError&) {
      throw;
    } catch (const GatewayError& e) {
      trace.extraction_errors.emplace_back(e.what());
      failure = PrefilterFailure{FallbackReason::ExtractionUnavailable, e.what()};
      return std::nullopt;
    }
    trace.extraction_replies.push_back(reply);
    std::vector<ParseNote> notes;
    try {
      TripletSet set = parse_triplet_response(reply, skb.schema(), &notes);
      trace.parse_notes = std::move(notes);
      return set;
    } catch (const ExtractionFormatError& e) {
      trace.extraction_errors.emplace_back(e.what());
      trace.parse_notes = std::move(notes);
    }
  }
  failure = PrefilterFailure{FallbackReason::ExtractionFailed, trace.extraction_errors.back()};
  return std::nullopt;
}

std::optional<NodeSet> prefilter(const SemiStructuredKB& skb, LLMGateway& gateway,
                                 const PipelineConfig& config, std::string_view query,
                                 AnswerTrace& trace, std::optional<PrefilterFailure>& failure) {
  auto start = Clock::now();
  trace.triplets = extract(skb, gateway, config, query, trace, failure);
  trace.timings.extraction_ms = elapsed_ms(start);
  if (!trace.triplets) return std::nullopt;

  start = Clock::now();
  std::optional<NodeSet> result;
  try {
    trace.grounded = prepare_triplets(skb, *trace.triplets, trace.filter, config.filter);
    result = substitute(skb, trace.grounded, trace.triplets->target, trace.filter, config.filter);
    if (result->empty()) {
      failure =
          PrefilterFailure{FallbackReason::EmptyFilter, "no candidate satisfies every constraint"};
    }
  } catch (const EmptyPreparationError& e) {
    failure = PrefilterFailure{FallbackReason::EmptyPreparation, e.what()};
  } catch (const UnconstrainedTargetError& e) {
    failure = PrefilterFailure{FallbackReason::UnconstrainedTarget, e.what()};
  }
  trace.timings.filter_ms = elapsed_ms(start);
  return result;
}

}  // namespace

Answer answer(const Retrieval& retrieval, LLMGateway& gateway, const PipelineConfig& config,
              std::string_view query) {
  if (query.empty()) throw std::invalid_argument("empty query");
  config.validate();
  const auto started = Clock::now();

  Answer out;
  AnswerTrace& trace = out.trace;
  trace.query = std::string(query);
  trace.k_max = config.k_max;
  trace.embedder_tag = retrieval.embedder.tag();
  trace.llm_model = config.llm_model;

  NodeSet filtered;
  if (!config.prefilter) {
    trace.fallback = FallbackReason::PrefilterDisabled;
  } else {
    std::optional<PrefilterFailure> failure;
    trace.filtered = prefilter(retrieval.skb, gateway, config, query, trace, failure);
    if (failure) {
      if (config.fallback == FallbackPolicy::Fail) {
        throw Error("pipeline", std::string(to_string(failure->reason)) + ": " + failure->detail);
      }
      trace.fallback = failure->reason;
      trace.fallback_detail = failure->detail;
    } else {
      filtered = *trace.filtered;
    }
  }

  auto start = Clock::now();
  trace.vss = vss_rank(retrieval.index, retrieval.embedder, query, filtered,
                       retrieval.skb.candidate_pool(), config.k_max);
  trace.timings.vss_ms = elapsed_ms(start);

  start = Clock::now();
  try {
    out.answers = rerank(retrieval.skb, gateway, query, trace.vss.filtered, trace.vss.additional,
                         config.k_max, config.rerank);
  } catch (const RerankUnavailableError& e) {
    trace.rerank_unavailable = true;
    trace.rerank_error = e.what();
    out.answers = vss_order(query, trace.vss.filtered, trace.vss.additional);
  }
  trace.timings.rerank_ms = elapsed_ms(start);

  trace.ranking = out.answers.entries;
  trace.timings.total_ms = elapsed_ms(started);
  return out;
}

}  // namespace skbf
