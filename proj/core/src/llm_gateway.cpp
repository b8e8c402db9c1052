#include "skbf/llm_gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "digest.hpp"
#include "http_json.hpp"
#include "skbf/errors.hpp"
#include "skbf/io.hpp"

namespace skbf {

using json = nlohmann::json;

std::string request_digest(const ChatRequest& req) {
  const json canonical = {
      {"system", req.system}, {"temperature", req.temperature}, {"user", req.user}};
  return detail::sha256_hex(canonical.dump());
}

void validate(const ChatRequest& req) {
  if (req.user.empty()) throw std::invalid_argument("chat request needs user text");
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
    throw std::invalid_argument("chat request temperature must be in [0, 2]");
  }
  if (req.max_tokens <= 0) throw std::invalid_argument("chat request max_tokens must be positive");
}

// Transcript

Transcript::Transcript(const Transcript& other) {
  std::lock_guard lock(other.mutex_);
  entries_ = other.entries_;
  first_by_digest_ = other.first_by_digest_;
}

Transcript& Transcript::operator=(const Transcript& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  entries_ = other.entries_;
  first_by_digest_ = other.first_by_digest_;
  return *this;
}

void Transcript::append(TranscriptEntry entry) {
  std::lock_guard lock(mutex_);
  first_by_digest_.emplace(entry.digest, entries_.size());
  entries_.push_back(std::move(entry));
}

std::optional<std::string> Transcript::find(std::string_view digest) const {
  std::lock_guard lock(mutex_);
  auto it = first_by_digest_.find(digest);
  if (it == first_by_digest_.end()) return std::nullopt;
  return entries_[it->second].response;
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t Transcript::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Transcript Transcript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript " + path);
  return parse(in);
}

Transcript Transcript::parse(std::istream& in) {
  Transcript t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json r = json::parse(line);
      t.append(TranscriptEntry{r.at("digest").get<std::string>(),
                               r.at("response").get<std::string>(), r.value("latency_ms", 0.0)});
    } catch (const json::exception& e) {
      throw IoError("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

void Transcript::write(std::ostream& out) const {
  for (const auto& e : entries()) {
    out << json{{"digest", e.digest}, {"response", e.response}, {"latency_ms", e.latency_ms}}.dump()
        << "\n";
  }
}

void Transcript::save(const std::string& path) const {
  std::ostringstream out;
  write(out);
  io::write_file_atomic(path, out.str());
}

// ScriptedProvider

void ScriptedProvider::script(const std::string& digest, std::string response) {
  std::lock_guard lock(mutex_);
  table_[digest] = std::move(response);
}

void ScriptedProvider::fail_next(int count) {
  std::lock_guard lock(mutex_);
  pending_failures_ = count;
}

std::string ScriptedProvider::send(const ChatRequest& req) {
  calls_.fetch_add(1);
  std::lock_guard lock(mutex_);
  if (pending_failures_ > 0) {
    --pending_failures_;
    throw TransportError("scripted transport failure");
  }
  const std::string digest = request_digest(req);
  if (auto it = table_.find(digest); it != table_.end()) return it->second;
  if (handler_) {
    if (auto reply = handler_(req)) return *reply;
  }
  throw TransportError("no scripted response for request " + digest);
}

// HttpChatProvider

HttpChatProvider::HttpChatProvider(HttpProviderOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) throw ConfigError("HTTP chat provider needs a base URL");
  if (options_.model.empty()) throw ConfigError("HTTP chat provider needs a model name");
}

std::string HttpChatProvider::send(const ChatRequest& req) {
  json body = {{"model", options_.model},
               {"temperature", req.temperature},
               {"max_tokens", req.max_tokens},
               {"messages", json::array()}};
  if (!req.system.empty())
    body["messages"].push_back({{"role", "system"}, {"content", req.system}});
  body["messages"].push_back({{"role", "user"}, {"content", req.user}});

  const json reply =
      detail::post_json(options_.base_url, options_.path, options_.api_key, body, options_.timeout);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("chat completion reply has no choices[0].message.content");
  }
}

std::uint64_t HttpChatProvider::requests_issued() noexcept {
  return detail::http_request_counter().load();
}

std::unique_ptr<LLMProvider> provider_from_environment() {
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  const std::string provider = env("SKBF_LLM_PROVIDER");
  if (provider.empty()) {
    throw ConfigError("no LLM provider configured: set SKBF_LLM_PROVIDER or pass --replay");
  }
  HttpProviderOptions options;
  options.api_key = env("SKBF_LLM_API_KEY");
  options.model = env("SKBF_LLM_MODEL");
  options.base_url = env("SKBF_LLM_BASE_URL");
  if (provider == "openai") {
    if (options.base_url.empty()) options.base_url = "https://api.openai.com";
    if (options.model.empty()) options.model = "gpt-4o-2024-05-13";
  } else if (provider != "http") {
    throw ConfigError("unknown SKBF_LLM_PROVIDER '" + provider + "' (expected openai or http)");
  }
  return std::make_unique<HttpChatProvider>(std::move(options));
}

// RateLimiter

RateLimiter::RateLimiter(double requests_per_minute)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, requests_per_minute / 60.0)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_per_sec_ <= 0.0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_sec_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_per_sec_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

// LLMGateway

LLMGateway::LLMGateway(LLMProvider& provider, GatewayOptions options)
    : provider_(&provider), options_(options), limiter_(options.requests_per_minute) {
  if (options_.mode == GatewayMode::Replay) {
    throw std::invalid_argument("replay gateways are constructed from a transcript");
  }
}

LLMGateway::LLMGateway(Transcript transcript, GatewayOptions options)
    : options_(options), transcript_(std::move(transcript)), limiter_(0.0) {
  options_.mode = GatewayMode::Replay;
}

std::string LLMGateway::complete(const ChatRequest& req) {
  validate(req);
  calls_.fetch_add(1);
  const std::string digest = request_digest(req);

  if (options_.mode == GatewayMode::Replay) {
    if (auto response = transcript_.find(digest)) return *response;
    throw ReplayMissError(digest);
  }

  std::string last_error;
  const int attempts = std::max(1, options_.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    limiter_.acquire();
    const auto start = std::chrono::steady_clock::now();
    try {
      std::string response = provider_->send(req);
      const double latency =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
              .count();
      if (options_.mode == GatewayMode::Record) {
        transcript_.append(TranscriptEntry{digest, response, latency});
      }
      return response;
    } catch (const TransportError& e) {
      last_error = e.what();
    }
    if (attempt < attempts && options_.backoff_base.count() > 0) {
      std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
    }
  }
  throw GatewayError(provider_->name() + " failed after " + std::to_string(attempts) +
                     " attempts: " + last_error);
}

}  // namespace skbf
