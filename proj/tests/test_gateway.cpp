#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "httplib.h"
#include "test_util.hpp"
#include "tomloom/gateway.hpp"
#include "tomloom/parallel.hpp"

using namespace tomloom;
using namespace tomloom::testing;

namespace {

ChatRequest request(const std::string& text, double temperature = 0.0) {
  ChatRequest r;
  r.model_id = "m";
  r.messages = {{"user", text}};
  r.temperature = temperature;
  return r;
}

/// Local OpenAI-compatible endpoint whose behaviour the test scripts.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::function<void(const httplib::Request&, httplib::Response&)> handler)
      : handler_(std::move(handler)) {
    server_.Post(R"(/v1/(chat/)?completions)", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      last_path = req.path;
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  HttpBackendConfig config() const {
    HttpBackendConfig c;
    c.api_base = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    c.api_key = "sk-test-secret-value";
    c.model = "fake-model";
    c.retry.initial_delay = std::chrono::milliseconds(1);
    c.retry.max_delay = std::chrono::milliseconds(5);
    c.retry.max_retries = 2;
    c.timeout = std::chrono::seconds(5);
    return c;
  }

  std::atomic<int> hits{0};
  std::string last_body, last_auth, last_path;

 private:
  std::function<void(const httplib::Request&, httplib::Response&)> handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

const char* kChatReply = R"({"choices":[{"message":{"role":"assistant","content":"<answer>box</answer>"}}],
                             "usage":{"prompt_tokens":12,"completion_tokens":4}})";

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

}  // namespace

// --- tokens & keys ------------------------------------------------------------

TEST(EstimateTokens, WordsAndPunctuation) {
  EXPECT_EQ(estimate_tokens(""), 0);
  EXPECT_EQ(estimate_tokens("Hello, world!"), 4);
  EXPECT_EQ(estimate_tokens("  a1b2 -- c "), 4);
}

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CacheKey, SensitiveToEveryField) {
  const auto base = request("hello");
  const auto k = cache_key(base);
  EXPECT_EQ(k, cache_key(request("hello")));
  auto r = base;
  r.model_id = "other";
  EXPECT_NE(cache_key(r), k);
  r = base;
  r.messages[0].text = "hello!";
  EXPECT_NE(cache_key(r), k);
  r = base;
  r.messages[0].role = "system";
  EXPECT_NE(cache_key(r), k);
  r = base;
  r.temperature = 0.5;
  EXPECT_NE(cache_key(r), k);
  r = base;
  r.max_tokens = 7;
  EXPECT_NE(cache_key(r), k);
  r = base;
  r.seed = 1;
  EXPECT_NE(cache_key(r), k);
}

// --- mock ---------------------------------------------------------------------

TEST(Mock, RulesInOrderAgainstLastUserMessage) {
  const auto script = MockScript::parse(R"({"rules":[{"contains":"workshop","response":"A"},
                                                     {"pattern":"moved the \\w+","response":"B"}],
                                            "default_response":"C"})");
  MockBackend m(script);
  EXPECT_EQ(m.complete(request("Bob entered the workshop and moved the ball")).text, "A");
  EXPECT_EQ(m.complete(request("Bob moved the ball")).text, "B");
  EXPECT_EQ(m.complete(request("nothing")).text, "C");
  ChatRequest r = request("workshop");
  r.messages.push_back({"assistant", "ok"});
  r.messages.push_back({"user", "next"});
  EXPECT_EQ(m.complete(r).text, "C");
  EXPECT_EQ(m.calls(), 4);
}

TEST(Mock, BadScriptsRejected) {
  EXPECT_EQ(code_of([] { MockScript::parse(R"({"rules":[{"response":"x"}]})"); }), Errc::ParseError);
  EXPECT_EQ(code_of([] { MockScript::parse("not json"); }), Errc::ParseError);
  EXPECT_EQ(code_of([] { MockBackend(MockScript::parse(R"({"rules":[{"pattern":"(","response":"x"}]})")); }),
            Errc::ParseError);
}

// --- cache & limiter ------------------------------------------------------------

TEST(Cache, SecondCallIsServedFromDisk) {
  TempDir dir;
  auto inner = std::make_shared<MockBackend>(reply_always("hi"));
  CachingBackend cached(inner, std::make_shared<ResponseCache>(dir.path()));
  const auto first = cached.complete(request("q"));
  const auto second = cached.complete(request("q"));
  EXPECT_FALSE(first.cached);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(second.text, "hi");
  EXPECT_EQ(inner->calls(), 1);

  // A fresh cache object over the same directory still hits.
  CachingBackend reopened(inner, std::make_shared<ResponseCache>(dir.path()));
  EXPECT_TRUE(reopened.complete(request("q")).cached);
  EXPECT_EQ(inner->calls(), 1);
}

TEST(Cache, SampledRequestsNeedSeed) {
  TempDir dir;
  auto inner = std::make_shared<MockBackend>(reply_always("hi"));
  CachingBackend cached(inner, std::make_shared<ResponseCache>(dir.path()));
  cached.complete(request("q", 0.7));
  EXPECT_FALSE(cached.complete(request("q", 0.7)).cached);
  auto seeded = request("q", 0.7);
  seeded.seed = 3;
  cached.complete(seeded);
  EXPECT_TRUE(cached.complete(seeded).cached);
  EXPECT_EQ(inner->calls(), 3);
}

TEST(Cache, ConcurrentWritersAgree) {
  TempDir dir;
  auto inner = std::make_shared<MockBackend>(reply_always("same"));
  CachingBackend cached(inner, std::make_shared<ResponseCache>(dir.path()));
  parallel_for(64, 8, [&](std::size_t i) { EXPECT_EQ(cached.complete(request("q" + std::to_string(i % 4))).text, "same"); });
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(cached.complete(request("q" + std::to_string(i))).cached);
}

TEST(Limiter, BoundsInFlightRequests) {
  class Slow final : public ChatBackend {
   public:
    ChatResponse complete(const ChatRequest&) override {
      const int now = ++in_flight;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --in_flight;
      return {"ok", {}, false, 0};
    }
    std::string model_id() const override { return "slow"; }
    std::atomic<int> in_flight{0}, peak{0};
  };
  auto slow = std::make_shared<Slow>();
  LimitedBackend limited(slow, 2);
  parallel_for(24, 8, [&](std::size_t) { limited.complete(request("x")); });
  EXPECT_LE(slow->peak.load(), 2);
  EXPECT_GE(slow->peak.load(), 1);
}

// --- http -----------------------------------------------------------------------

TEST(Http, ChatRoundTrip) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.set_content(kChatReply, "application/json"); });
  HttpBackend b(ep.config());
  auto r = request("Where is the ball?");
  r.model_id = "";
  r.seed = 9;
  const auto resp = b.complete(r);
  EXPECT_EQ(resp.text, "<answer>box</answer>");
  EXPECT_EQ(resp.usage.input_tokens, 12);
  EXPECT_EQ(resp.usage.output_tokens, 4);
  EXPECT_FALSE(resp.usage.estimated);
  EXPECT_EQ(ep.last_path, "/v1/chat/completions");
  EXPECT_EQ(ep.last_auth, "Bearer sk-test-secret-value");
  const auto body = Json::parse(ep.last_body);
  EXPECT_EQ(body.at("model"), "fake-model");
  EXPECT_EQ(body.at("seed"), 9);
  EXPECT_EQ(body.at("messages").at(0).at("content"), "Where is the ball?");
}

TEST(Http, CompletionsEndpointSendsPrompt) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"text":"rest of story"}]})", "application/json");
  });
  auto cfg = ep.config();
  cfg.endpoint = HttpBackendConfig::Endpoint::Completions;
  HttpBackend b(cfg);
  const auto resp = b.complete(request("1. Bob entered.\n"));
  EXPECT_EQ(resp.text, "rest of story");
  EXPECT_TRUE(resp.usage.estimated);
  EXPECT_EQ(ep.last_path, "/v1/completions");
  EXPECT_EQ(Json::parse(ep.last_body).at("prompt"), "1. Bob entered.\n");
}

TEST(Http, RetriesTransientFailures) {
  std::atomic<int> n{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    if (++n <= 2) {
      res.status = n == 1 ? 429 : 503;
      return;
    }
    res.set_content(kChatReply, "application/json");
  });
  HttpBackend b(ep.config());
  EXPECT_EQ(b.complete(request("q")).text, "<answer>box</answer>");
  EXPECT_EQ(ep.hits.load(), 3);
}

TEST(Http, GivesUpAfterRetryBudget) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  HttpBackend b(ep.config());
  EXPECT_EQ(code_of([&] { b.complete(request("q")); }), Errc::RateLimited);
  EXPECT_EQ(ep.hits.load(), 3);
}

TEST(Http, AuthFailureIsNotRetriedAndHidesKey) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  HttpBackend b(ep.config());
  try {
    b.complete(request("q"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AuthError);
    EXPECT_EQ(std::string(e.what()).find("sk-test-secret-value"), std::string::npos);
  }
  EXPECT_EQ(ep.hits.load(), 1);
}

TEST(Http, MalformedBody) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.set_content("{\"choices\":[]}", "application/json"); });
  HttpBackend b(ep.config());
  EXPECT_EQ(code_of([&] { b.complete(request("q")); }), Errc::MalformedResponse);
}

TEST(Http, ClientErrorIsBackendError) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("bad model", "text/plain");
  });
  HttpBackend b(ep.config());
  EXPECT_EQ(code_of([&] { b.complete(request("q")); }), Errc::BackendError);
  EXPECT_EQ(ep.hits.load(), 1);
}

TEST(Http, UnreachableEndpoint) {
  HttpBackendConfig c;
  c.api_base = "http://127.0.0.1:1/v1";
  c.model = "m";
  c.retry.max_retries = 0;
  c.timeout = std::chrono::seconds(2);
  HttpBackend b(c);
  const auto code = code_of([&] { b.complete(request("q")); });
  EXPECT_TRUE(code == Errc::BackendError || code == Errc::Timeout);
}

TEST(Http, MissingConfigurationNamesVariable) {
  try {
    HttpBackend b(HttpBackendConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
    EXPECT_NE(std::string(e.what()).find("TOMLOOM_API_BASE"), std::string::npos);
  }
  HttpBackendConfig no_model;
  no_model.api_base = "http://localhost/v1";
  EXPECT_EQ(code_of([&] { HttpBackend b(no_model); }), Errc::ConfigError);
  no_model.model = "m";
  no_model.api_base = "localhost/v1";
  EXPECT_EQ(code_of([&] { HttpBackend b(no_model); }), Errc::ConfigError);
}

TEST(Http, ComposesWithCacheAndLimiter) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.set_content(kChatReply, "application/json"); });
  TempDir dir;
  auto http = std::make_shared<HttpBackend>(ep.config());
  auto limited = std::make_shared<LimitedBackend>(http, 4);
  CachingBackend cached(limited, std::make_shared<ResponseCache>(dir.path()));
  cached.complete(request("q"));
  EXPECT_TRUE(cached.complete(request("q")).cached);
  EXPECT_EQ(ep.hits.load(), 1);
  // The credential never reaches the cache files.
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (entry.is_regular_file()) {
      EXPECT_EQ(read_file(entry.path().string()).find("sk-test-secret-value"), std::string::npos);
    }
  }
}
