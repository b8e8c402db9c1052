#include "skbf/config.hpp"

#include <cctype>
#include <charconv>
#include <functional>
#include <map>

#include "skbf/errors.hpp"
#include "skbf/io.hpp"

namespace skbf {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

// Unquoted value of the right-hand side; trailing comments are dropped.
std::string parse_value(std::string_view raw, std::size_t line) {
  auto fail = [line](const std::string& what) {
    return ConfigError("config line " + std::to_string(line) + ": " + what);
  };
  if (raw.empty()) throw fail("missing value");
  if (raw.front() != '"') {
    const auto hash = raw.find('#');
    const std::string_view v = trim(raw.substr(0, hash));
    if (v.empty()) throw fail("missing value");
    return std::string(v);
  }
  std::string out;
  std::size_t i = 1;
  for (; i < raw.size() && raw[i] != '"'; ++i) {
    if (raw[i] != '\\') {
      out.push_back(raw[i]);
      continue;
    }
    if (++i == raw.size()) throw fail("unterminated escape");
    switch (raw[i]) {
      case '"':
        out.push_back('"');
        break;
      case '\\':
        out.push_back('\\');
        break;
      case 'n':
        out.push_back('\n');
        break;
      case 't':
        out.push_back('\t');
        break;
      default:
        throw fail(std::string("unknown escape \\") + raw[i]);
    }
  }
  if (i == raw.size()) throw fail("unterminated string");
  const std::string_view tail = trim(raw.substr(i + 1));
  if (!tail.empty() && tail.front() != '#') throw fail("unexpected text after string");
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    throw ConfigError("setting '" + std::string(key) + "' expects a number, got '" +
                      std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("setting '" + std::string(key) + "' expects true or false, got '" +
                    std::string(value) + "'");
}

TypeMode parse_mode(std::string_view key, std::string_view value) {
  std::string lowered(value);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (auto m = parse_type_mode(lowered)) return *m;
  throw ConfigError("setting '" + std::string(key) + "' expects strict or relaxed, got '" +
                    std::string(value) + "'");
}

using Setter = std::function<void(PipelineConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["k_max"] = [](PipelineConfig& c, auto k, auto v) {
      c.k_max = parse_number<std::size_t>(k, v);
    };
    t["prefilter"] = [](PipelineConfig& c, auto k, auto v) { c.prefilter = parse_bool(k, v); };
    t["fallback"] = [](PipelineConfig& c, auto k, auto v) {
      if (v == "vss_rerank") {
        c.fallback = FallbackPolicy::VssRerank;
      } else if (v == "fail") {
        c.fallback = FallbackPolicy::Fail;
      } else {
        throw ConfigError("setting '" + std::string(k) + "' expects vss_rerank or fail");
      }
    };
    t["embedder"] = [](PipelineConfig& c, auto, auto v) { c.embedder = std::string(v); };
    t["llm_model"] = [](PipelineConfig& c, auto, auto v) { c.llm_model = std::string(v); };
    t["temperature"] = [](PipelineConfig& c, auto k, auto v) {
      c.temperature = parse_number<double>(k, v);
    };
    t["parallel"] = [](PipelineConfig& c, auto k, auto v) {
      c.parallel = parse_number<std::size_t>(k, v);
    };
    t["max_attempts"] = [](PipelineConfig& c, auto k, auto v) {
      c.max_attempts = parse_number<int>(k, v);
    };
    t["requests_per_minute"] = [](PipelineConfig& c, auto k, auto v) {
      c.requests_per_minute = parse_number<double>(k, v);
    };
    t["filter.mode_out"] = [](PipelineConfig& c, auto k, auto v) {
      c.filter.mode_out = parse_mode(k, v);
    };
    t["filter.mode_in"] = [](PipelineConfig& c, auto k, auto v) {
      c.filter.mode_in = parse_mode(k, v);
    };
    t["filter.ground_top_m"] = [](PipelineConfig& c, auto k, auto v) {
      c.filter.ground_top_m = parse_number<std::size_t>(k, v);
    };
    t["filter.alias_threshold"] = [](PipelineConfig& c, auto k, auto v) {
      c.filter.alias_threshold = parse_number<double>(k, v);
    };
    t["filter.sweep_cap"] = [](PipelineConfig& c, auto k, auto v) {
      c.filter.sweep_cap = parse_number<std::size_t>(k, v);
    };
    t["filter.evidence_per_triplet"] = [](PipelineConfig& c, auto k, auto v) {
      c.filter.evidence_per_triplet = parse_number<std::size_t>(k, v);
    };
    t["rerank.strict_blocks"] = [](PipelineConfig& c, auto k, auto v) {
      c.rerank.strict_blocks = parse_bool(k, v);
    };
    t["rerank.background_budget"] = [](PipelineConfig& c, auto k, auto v) {
      c.rerank.background_budget = parse_number<std::size_t>(k, v);
    };
    t["rerank.parallelism"] = [](PipelineConfig& c, auto k, auto v) {
      c.rerank.parallelism = parse_number<std::size_t>(k, v);
    };
    // Flat spellings matching the CLI flags.
    t["edge_type_mode_out"] = t["filter.mode_out"];
    t["edge_type_mode_in"] = t["filter.mode_in"];
    t["ground_top_m"] = t["filter.ground_top_m"];
    t["alias_threshold"] = t["filter.alias_threshold"];
    t["strict_blocks"] = t["rerank.strict_blocks"];
    return t;
  }();
  return table;
}

}  // namespace

std::string_view to_string(FallbackPolicy p) noexcept {
  return p == FallbackPolicy::VssRerank ? "vss_rerank" : "fail";
}

void PipelineConfig::validate() const {
  if (k_max < 1) throw ConfigError("k_max must be at least 1");
  if (filter.ground_top_m < 1) throw ConfigError("ground_top_m must be at least 1");
  if (!(filter.alias_threshold > 0.0 && filter.alias_threshold <= 1.0)) {
    throw ConfigError("alias_threshold must be in (0, 1]");
  }
  if (filter.sweep_cap < 1) throw ConfigError("sweep_cap must be at least 1");
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw ConfigError("temperature must be in [0, 2]");
  if (parallel < 1) throw ConfigError("parallel must be at least 1");
  if (rerank.parallelism < 1) throw ConfigError("rerank.parallelism must be at least 1");
  if (max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  if (requests_per_minute < 0.0) throw ConfigError("requests_per_minute must not be negative");
}

std::vector<ConfigEntry> parse_config_text(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fail = [line_no](const std::string& what) {
      return ConfigError("config line " + std::to_string(line_no) + ": " + what);
    };
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw fail("unterminated section header");
      const std::string_view rest = trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') throw fail("unexpected text after section header");
      const std::string_view name = trim(line.substr(1, close - 1));
      if (!is_bare_key(name)) throw fail("invalid section name");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!is_bare_key(key)) throw fail("invalid key '" + std::string(key) + "'");
    std::string full_key = section.empty() ? std::string(key) : section + "." + std::string(key);
    out.push_back(
        ConfigEntry{std::move(full_key), parse_value(trim(line.substr(eq + 1)), line_no), line_no});
  }
  return out;
}

void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown setting '" + std::string(key) + "'");
  it->second(config, key, value);
}

PipelineConfig config_from_text(std::string_view text) {
  PipelineConfig config;
  for (const auto& entry : parse_config_text(text)) {
    try {
      apply_setting(config, entry.key, entry.value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(entry.line) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

PipelineConfig load_config(const std::string& path) {
  return config_from_text(io::read_file(path));
}

}  // namespace skbf
