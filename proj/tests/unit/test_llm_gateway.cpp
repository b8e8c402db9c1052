#include <gtest/gtest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "skbf/errors.hpp"
#include "skbf/llm_gateway.hpp"

namespace skbf {
namespace {

using namespace std::chrono_literals;

ChatRequest request(std::string user, double temperature = 0.0) {
  ChatRequest r;
  r.system = "sys";
  r.user = std::move(user);
  r.temperature = temperature;
  return r;
}

GatewayOptions fast(GatewayMode mode = GatewayMode::Live) {
  GatewayOptions o;
  o.mode = mode;
  o.backoff_base = 0ms;
  return o;
}

TEST(RequestDigest, CoversSystemUserAndTemperatureOnly) {
  const auto base = request_digest(request("hello"));
  EXPECT_EQ(base.size(), 64u);
  EXPECT_EQ(base, request_digest(request("hello")));
  EXPECT_NE(base, request_digest(request("hello!")));
  EXPECT_NE(base, request_digest(request("hello", 0.5)));
  auto other_sys = request("hello");
  other_sys.system = "other";
  EXPECT_NE(base, request_digest(other_sys));
  auto tagged = request("hello");
  tagged.tag = "rerank";
  tagged.max_tokens = 3;
  EXPECT_EQ(base, request_digest(tagged));
}

TEST(RequestValidation, RejectsOutOfRange) {
  EXPECT_THROW(validate(request("")), std::invalid_argument);
  EXPECT_THROW(validate(request("x", -0.1)), std::invalid_argument);
  EXPECT_THROW(validate(request("x", 2.5)), std::invalid_argument);
  auto r = request("x");
  r.max_tokens = 0;
  EXPECT_THROW(validate(r), std::invalid_argument);
  EXPECT_NO_THROW(validate(request("x", 2.0)));
}

TEST(Gateway, ScriptedDigestReturnsExactText) {
  ScriptedProvider provider;
  provider.script(request("q"), "exact reply\nwith lines");
  LLMGateway gw(provider, fast());
  EXPECT_EQ(gw.complete(request("q")), "exact reply\nwith lines");
  EXPECT_EQ(gw.transcript().size(), 0u);
}

TEST(Gateway, RetriesTransientFailures) {
  ScriptedProvider provider;
  provider.script(request("q"), "ok");
  provider.fail_next(2);
  LLMGateway gw(provider, fast());
  EXPECT_EQ(gw.complete(request("q")), "ok");
  EXPECT_EQ(provider.calls(), 3u);
}

TEST(Gateway, ThreeFailuresRaiseGatewayError) {
  ScriptedProvider provider;
  provider.script(request("q"), "ok");
  provider.fail_next(3);
  LLMGateway gw(provider, fast());
  try {
    (void)gw.complete(request("q"));
    FAIL() << "expected GatewayError";
  } catch (const ReplayMissError&) {
    FAIL() << "wrong error type";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.module(), "llm_gateway");
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos);
  }
  EXPECT_EQ(provider.calls(), 3u);
}

TEST(Gateway, RecordThenReplayIsIdentical) {
  ScriptedProvider provider(
      [](const ChatRequest& r) -> std::optional<std::string> { return "echo:" + r.user; });
  LLMGateway recorder(provider, fast(GatewayMode::Record));
  const auto a = recorder.complete(request("one"));
  const auto b = recorder.complete(request("two"));
  ASSERT_EQ(recorder.transcript().size(), 2u);

  std::stringstream buf;
  recorder.transcript().write(buf);
  LLMGateway replay(Transcript::parse(buf));
  EXPECT_EQ(replay.mode(), GatewayMode::Replay);
  EXPECT_EQ(replay.complete(request("one")), a);
  EXPECT_EQ(replay.complete(request("two")), b);
  EXPECT_EQ(provider.calls(), 2u);
}

TEST(Gateway, ReplayMissNamesDigest) {
  LLMGateway gw(Transcript{});
  try {
    (void)gw.complete(request("unknown"));
    FAIL();
  } catch (const ReplayMissError& e) {
    EXPECT_EQ(e.digest(), request_digest(request("unknown")));
  }
}

TEST(Transcript, FirstResponseWinsAndMalformedLinesFail) {
  Transcript t;
  t.append({"d", "first", 1.0});
  t.append({"d", "second", 2.0});
  EXPECT_EQ(t.find("d"), "first");
  EXPECT_EQ(t.find("x"), std::nullopt);

  std::istringstream bad("{\"digest\": \"d\"}\n");
  EXPECT_THROW((void)Transcript::parse(bad), Error);
}

TEST(Transcript, ConcurrentAppendsKeepEveryEntry) {
  Transcript t;
  {
    std::vector<std::jthread> threads;
    for (int k = 0; k < 4; ++k) {
      threads.emplace_back([&t, k] {
        for (int i = 0; i < 250; ++i) t.append({std::to_string(k * 1000 + i), "r", 0.0});
      });
    }
  }
  EXPECT_EQ(t.size(), 1000u);
  EXPECT_EQ(t.find("3249"), "r");
}

TEST(RateLimiter, ZeroIsUnlimited) {
  RateLimiter limiter(0.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) limiter.acquire();
  EXPECT_LT(std::chrono::steady_clock::now() - start, 1s);
}

class LoopbackServer {
 public:
  explicit LoopbackServer(
      std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LoopbackServer() { server_.stop(); }
  [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::jthread thread_;
};

TEST(HttpChatProvider, SpeaksChatCompletions) {
  nlohmann::json seen;
  std::string auth;
  LoopbackServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"0.4"}}]})",
                    "application/json");
  });
  HttpChatProvider provider({server.url(), "/v1/chat/completions", "secret", "m1", 5s});
  const auto before = HttpChatProvider::requests_issued();
  auto req = request("score this");
  req.max_tokens = 8;
  EXPECT_EQ(provider.send(req), "0.4");
  EXPECT_EQ(HttpChatProvider::requests_issued(), before + 1);
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_EQ(seen["model"], "m1");
  EXPECT_EQ(seen["max_tokens"], 8);
  EXPECT_EQ(seen["messages"][0]["role"], "system");
  EXPECT_EQ(seen["messages"][1]["content"], "score this");
}

TEST(HttpChatProvider, ServerErrorsAreTransportErrors) {
  LoopbackServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  HttpChatProvider provider({server.url(), "/v1/chat/completions", "", "m1", 5s});
  EXPECT_THROW((void)provider.send(request("q")), TransportError);

  LLMGateway gw(provider, fast());
  EXPECT_THROW((void)gw.complete(request("q")), GatewayError);
}

TEST(HttpChatProvider, MalformedReplyIsTransportError) {
  LoopbackServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  HttpChatProvider provider({server.url(), "/v1/chat/completions", "", "m1", 5s});
  EXPECT_THROW((void)provider.send(request("q")), TransportError);
}

}  // namespace
}  // namespace skbf
