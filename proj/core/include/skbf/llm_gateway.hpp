#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace skbf {

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 512;
  std::string tag;  // "extraction" | "rerank"
};

/// Content hash of a request: SHA-256 over system text, user text and
/// temperature. Stable across runs; used as the replay key.
[[nodiscard]] std::string request_digest(const ChatRequest& req);

/// Throws std::invalid_argument unless temperature is in [0, 2], user text is
/// non-empty and max_tokens is positive.
void validate(const ChatRequest& req);

struct TranscriptEntry {
  std::string digest;
  std::string response;
  double latency_ms = 0.0;
};

/// Ordered request/response log. Appends are serialized; lookups return the
/// first response recorded for a digest.
class Transcript {
 public:
  Transcript() = default;
  Transcript(const Transcript& other);
  Transcript& operator=(const Transcript& other);

  void append(TranscriptEntry entry);
  [[nodiscard]] std::optional<std::string> find(std::string_view digest) const;
  [[nodiscard]] std::vector<TranscriptEntry> entries() const;
  [[nodiscard]] std::size_t size() const;

  /// JSON Lines of {"digest", "response", "latency_ms"}.
  static Transcript load(const std::string& path);
  static Transcript parse(std::istream& in);
  void save(const std::string& path) const;
  void write(std::ostream& out) const;

 private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> first_by_digest_;
};

/// A chat-completion backend. Implementations throw TransportError for a
/// failed attempt (the gateway decides whether to retry).
class LLMProvider {
 public:
  virtual ~LLMProvider() = default;
  virtual std::string send(const ChatRequest& req) = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Deterministic in-process provider. Responses come from an exact digest
/// table first, then from the handler, if any. Unscripted requests raise
/// TransportError.
class ScriptedProvider final : public LLMProvider {
 public:
  using Handler = std::function<std::optional<std::string>(const ChatRequest&)>;

  ScriptedProvider() = default;
  explicit ScriptedProvider(Handler handler) : handler_(std::move(handler)) {}

  void script(const std::string& digest, std::string response);
  void script(const ChatRequest& req, std::string response) {
    script(request_digest(req), std::move(response));
  }
  /// Makes the next `count` calls fail with TransportError.
  void fail_next(int count);

  std::string send(const ChatRequest& req) override;
  [[nodiscard]] std::string name() const override { return "scripted"; }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::mutex mutex_;
  std::map<std::string, std::string> table_;
  Handler handler_;
  int pending_failures_ = 0;
  std::atomic<std::size_t> calls_{0};
};

struct HttpProviderOptions {
  std::string base_url;  // e.g. https://api.openai.com
  std::string path = "/v1/chat/completions";
  std::string api_key;
  std::string model;
  std::chrono::seconds timeout{60};
};

/// Speaks the common chat-completions HTTP contract:
/// POST {model, messages:[system,user], temperature, max_tokens} and reads
/// choices[0].message.content.
class HttpChatProvider final : public LLMProvider {
 public:
  explicit HttpChatProvider(HttpProviderOptions options);

  std::string send(const ChatRequest& req) override;
  [[nodiscard]] std::string name() const override { return "http:" + options_.model; }

  /// Process-wide count of HTTP requests attempted by any instance.
  static std::uint64_t requests_issued() noexcept;

 private:
  HttpProviderOptions options_;
};

/// Environment-driven provider selection: SKBF_LLM_PROVIDER ("openai" or
/// "http"), SKBF_LLM_API_KEY, SKBF_LLM_MODEL, SKBF_LLM_BASE_URL.
/// Throws ConfigError when the variables are missing or unknown.
std::unique_ptr<LLMProvider> provider_from_environment();

/// Token bucket limiting requests per minute. 0 disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute);
  void acquire();

 private:
  std::mutex mutex_;
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

enum class GatewayMode { Live, Record, Replay };

struct GatewayOptions {
  GatewayMode mode = GatewayMode::Live;
  int max_attempts = 3;  // first try plus two retries
  std::chrono::milliseconds backoff_base{500};
  double requests_per_minute = 0.0;
};

/// Uniform entry point for every LLM call. Live and Record forward to the
/// provider with retries; Record also appends to the transcript. Replay
/// answers from the transcript alone and never touches a provider.
class LLMGateway {
 public:
  /// Live or Record mode. The provider must outlive the gateway.
  LLMGateway(LLMProvider& provider, GatewayOptions options = {});
  /// Replay mode over a fixed transcript.
  explicit LLMGateway(Transcript transcript, GatewayOptions options = {});

  /// Throws GatewayError after exhausting retries, ReplayMissError when
  /// replaying an unknown request.
  std::string complete(const ChatRequest& req);

  [[nodiscard]] GatewayMode mode() const noexcept { return options_.mode; }
  [[nodiscard]] const Transcript& transcript() const noexcept { return transcript_; }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 private:
  LLMProvider* provider_ = nullptr;
  GatewayOptions options_;
  Transcript transcript_;
  RateLimiter limiter_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace skbf
