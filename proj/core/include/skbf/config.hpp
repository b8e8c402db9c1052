#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skbf/candidate_filter.hpp"
#include "skbf/reranker.hpp"

namespace skbf {

/// What answer() does when the prefilter cannot produce candidates.
enum class FallbackPolicy {
  VssRerank,  // rank the whole candidate pool with VSS + reranker
  Fail,       // propagate the prefilter error
};

struct PipelineConfig {
  std::size_t k_max = 20;
  bool prefilter = true;  // false skips extraction and filtering entirely
  FallbackPolicy fallback = FallbackPolicy::VssRerank;
  FilterOptions filter;
  RerankOptions rerank;
  std::string embedder = "hashing";
  std::string llm_model;  // informational, copied into traces
  double temperature = 0.0;
  std::size_t parallel = 1;  // concurrent queries during evaluation
  int max_attempts = 3;
  double requests_per_minute = 0.0;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// One `key = value` assignment. Keys inside a `[section]` are prefixed
/// with "section.".
struct ConfigEntry {
  std::string key;
  std::string value;  // unquoted
  std::size_t line = 0;
};

/// TOML-style subset: `# comments`, `[section]` headers, and `key = value`
/// with double-quoted strings, integers, decimals and true/false.
/// Throws ConfigError with the line number on malformed input.
[[nodiscard]] std::vector<ConfigEntry> parse_config_text(std::string_view text);

/// Applies one setting by key ("k_max", "filter.mode_out", ...). Both the
/// dotted and the flat spelling ("edge_type_mode_out") are accepted.
/// Throws ConfigError for unknown keys and unparsable values.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

[[nodiscard]] PipelineConfig load_config(const std::string& path);
[[nodiscard]] PipelineConfig config_from_text(std::string_view text);

std::string_view to_string(FallbackPolicy p) noexcept;

}  // namespace skbf
