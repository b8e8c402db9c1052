#include "skbf/reranker.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "skbf/errors.hpp"
#include "skbf/text.hpp"

namespace skbf {

std::string_view to_string(Block b) noexcept {
  return b == Block::Filtered ? "filtered" : "additional";
}

std::string_view rerank_system_prompt() noexcept {
  return "You judge how well a knowledge-base entity answers a question. "
         "Reply with one decimal number between 0 and 1 and nothing else.";
}

std::string build_rerank_prompt(std::string_view query, std::string_view candidate_name,
                                std::string_view background, std::size_t budget) {
  std::string bg(text::utf8_prefix(background, budget));
  if (bg.size() < background.size()) bg += kTruncationMarker;
  std::string out;
  out += "Question: ";
  out += query;
  out += "\n\nCandidate: ";
  out += candidate_name;
  out += "\n\nBackground:\n";
  out += bg;
  out +=
      "\n\nHow well does the candidate answer the question? Answer with a single decimal "
      "number in [0, 1], where 1 means a perfect fit.";
  return out;
}

std::optional<double> parse_score(std::string_view reply) {
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  while (!reply.empty() && is_space(reply.front())) reply.remove_prefix(1);
  while (!reply.empty() && is_space(reply.back())) reply.remove_suffix(1);
  if (reply.empty()) return std::nullopt;

  const std::size_t dot = reply.find('.');
  const std::string_view whole = reply.substr(0, dot);
  const std::string_view frac =
      dot == std::string_view::npos ? std::string_view{} : reply.substr(dot + 1);
  if (!std::all_of(whole.begin(), whole.end(), is_digit)) return std::nullopt;
  if (!std::all_of(frac.begin(), frac.end(), is_digit)) return std::nullopt;
  if (dot != std::string_view::npos && frac.empty()) return std::nullopt;
  if (whole.empty() && frac.empty()) return std::nullopt;

  double value = 0.0;
  const auto [end, ec] = std::from_chars(reply.data(), reply.data() + reply.size(), value);
  if (ec != std::errc() || end != reply.data() + reply.size()) return std::nullopt;
  if (!(value >= 0.0 && value <= 1.0)) return std::nullopt;
  return value;
}

void order_entries(std::vector<RerankEntry>& entries, bool strict_blocks) {
  std::sort(entries.begin(), entries.end(),
            [strict_blocks](const RerankEntry& a, const RerankEntry& b) {
              if (strict_blocks && a.block != b.block) return a.block == Block::Filtered;
              const double la = a.llm_score.value_or(0.0);
              const double lb = b.llm_score.value_or(0.0);
              if (la != lb) return la > lb;
              if (a.vss_score != b.vss_score) return a.vss_score > b.vss_score;
              return a.node < b.node;
            });
}

RankedAnswers vss_order(std::string_view query, const std::vector<ScoredNode>& filtered,
                        const std::vector<ScoredNode>& additional) {
  RankedAnswers out{std::string(query), {}};
  for (const auto& s : filtered)
    out.entries.push_back(RerankEntry{s.node, Block::Filtered, s.score, {}, {}});
  for (const auto& s : additional) {
    out.entries.push_back(RerankEntry{s.node, Block::Additional, s.score, {}, {}});
  }
  return out;
}

RankedAnswers rerank(const SemiStructuredKB& skb, LLMGateway& gateway, std::string_view query,
                     const std::vector<ScoredNode>& filtered,
                     const std::vector<ScoredNode>& additional, std::size_t k_max,
                     const RerankOptions& options) {
  if (filtered.size() + additional.size() > k_max) {
    throw std::invalid_argument("rerank input exceeds k_max");
  }
  RankedAnswers out = vss_order(query, filtered, additional);
  if (out.entries.empty()) return out;

  std::vector<char> failed(out.entries.size(), 0);
  std::atomic<std::size_t> next{0};
  // First error that must reach the caller: replay misses and anything that
  // is not an LLM failure.
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < out.entries.size(); i = next.fetch_add(1)) {
      RerankEntry& e = out.entries[i];
      try {
        const Node& node = skb.node(e.node);
        ChatRequest req;
        req.system = std::string(rerank_system_prompt());
        req.user = build_rerank_prompt(query, node.canonical_name(), skb.document_of(e.node),
                                       options.background_budget);
        req.max_tokens = 8;
        req.tag = "rerank";
        e.rationale = gateway.complete(req);
        e.llm_score = parse_score(e.rationale);
      } catch (const ReplayMissError&) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      } catch (const GatewayError& err) {
        e.rationale = err.what();
        failed[i] = 1;
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, out.entries.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (fatal) std::rethrow_exception(fatal);
  if (std::all_of(failed.begin(), failed.end(), [](char f) { return f != 0; })) {
    throw RerankUnavailableError("every rerank request failed: " + out.entries.front().rationale);
  }
  order_entries(out.entries, options.strict_blocks);
  return out;
}

}  // namespace skbf
