#pragma once

// Uniform chat-completion interface: OpenAI-compatible HTTP backends, a
// scriptable deterministic mock, an on-disk response cache and a global
// in-flight limiter. Backends compose by wrapping (cache -> limiter -> http).

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "tomloom/core.hpp"

namespace tomloom {

struct Message {
  std::string role;  // "system", "user" or "assistant"
  std::string text;

  friend bool operator==(const Message&, const Message&) = default;
};

struct ChatRequest {
  std::string model_id;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
};

struct Usage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  bool estimated = false;
};

struct ChatResponse {
  std::string text;
  Usage usage;
  bool cached = false;
  std::int64_t latency_ms = 0;
};

/// Thread-safe: complete() may be called from many workers at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

/// Whitespace + punctuation token count: every maximal run of letters/digits
/// (or non-ASCII bytes) is one token, every other non-space byte is one token.
std::int64_t estimate_tokens(std::string_view text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// SHA-256 (hex) over the canonical JSON of model, messages, temperature,
/// max_tokens and seed.
std::string cache_key(const ChatRequest& request);

// --- mock -----------------------------------------------------------------

struct MockRule {
  enum class Kind { Substring, Pattern };
  Kind kind = Kind::Substring;
  std::string matcher;
  std::string response;
};

/// Rules are tried in order against the last user message; first match wins.
///
/// File form:
///   {"rules": [{"contains": "workshop", "response": "..."},
///              {"pattern": "moved the \\w+", "response": "..."}],
///    "default_response": "..."}
struct MockScript {
  std::vector<MockRule> rules;
  std::string default_response;

  static MockScript parse(std::string_view json_text);
  static MockScript load(const std::string& path);
};

class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(MockScript script, std::string model_id = "mock");

  ChatResponse complete(const ChatRequest& request) override;
  std::string model_id() const override { return model_id_; }

  std::int64_t calls() const noexcept { return calls_.load(); }

 private:
  MockScript script_;
  std::vector<std::optional<std::regex>> compiled_;
  std::string model_id_;
  std::atomic<std::int64_t> calls_{0};
};

// --- http -----------------------------------------------------------------

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_delay{500};
  double backoff_factor = 2.0;
  double jitter = 0.25;  // +/- fraction of each delay
  std::chrono::milliseconds max_delay{8000};
};

inline constexpr std::string_view kEnvApiBase = "TOMLOOM_API_BASE";
inline constexpr std::string_view kEnvApiKey = "TOMLOOM_API_KEY";
inline constexpr std::string_view kEnvModel = "TOMLOOM_MODEL";

struct HttpBackendConfig {
  enum class Endpoint { Chat, Completions };

  std::string api_base;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::string model;
  Endpoint endpoint = Endpoint::Chat;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};

  /// Fills api_base, api_key and model from TOMLOOM_* variables when set.
  static HttpBackendConfig from_env();
};

/// OpenAI-compatible /chat/completions (or legacy /completions) client.
class HttpBackend final : public ChatBackend {
 public:
  /// Throws Error{ConfigError} when api_base or model is missing.
  explicit HttpBackend(HttpBackendConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string model_id() const override { return config_.model; }

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

// --- cache & limiter --------------------------------------------------------

std::filesystem::path default_cache_dir();

class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<ChatResponse> get(const std::string& key) const;
  void put(const std::string& key, const ChatResponse& response);
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::mutex& stripe(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::array<std::mutex, 32> stripes_;
};

/// Serves repeated requests from the cache. Requests with temperature > 0 are
/// cached only when they carry an explicit seed.
class CachingBackend final : public ChatBackend {
 public:
  CachingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache);

  ChatResponse complete(const ChatRequest& request) override;
  std::string model_id() const override { return inner_->model_id(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

/// Bounds the number of concurrent requests reaching `inner`.
class LimitedBackend final : public ChatBackend {
 public:
  LimitedBackend(std::shared_ptr<ChatBackend> inner, int max_in_flight);

  ChatResponse complete(const ChatRequest& request) override;
  std::string model_id() const override { return inner_->model_id(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::counting_semaphore<1024> slots_;
};

}  // namespace tomloom
