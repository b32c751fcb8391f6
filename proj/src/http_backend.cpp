#include <algorithm>
#include <cstdlib>
#include <random>
#include <thread>

#include "httplib.h"
#include "tomloom/gateway.hpp"

namespace tomloom {

namespace {

std::string env_or_empty(std::string_view name) {
  const char* v = std::getenv(std::string(name).c_str());
  return v ? std::string(v) : std::string{};
}

bool transient_status(int status) { return status == 429 || status == 500 || status == 502 || status == 503 || status == 504; }

std::chrono::milliseconds backoff_delay(const RetryPolicy& p, int attempt) {
  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  double ms = static_cast<double>(p.initial_delay.count());
  for (int i = 0; i < attempt; ++i) ms *= p.backoff_factor;
  ms = std::min(ms, static_cast<double>(p.max_delay.count()));
  std::uniform_real_distribution<double> spread(1.0 - p.jitter, 1.0 + p.jitter);
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms * spread(jitter_rng)));
}

std::string snippet(const std::string& body) { return body.size() > 200 ? body.substr(0, 200) + "..." : body; }

}  // namespace

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig c;
  c.api_base = env_or_empty(kEnvApiBase);
  c.api_key = env_or_empty(kEnvApiKey);
  c.model = env_or_empty(kEnvModel);
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.api_base.empty()) {
    throw Error(Errc::ConfigError, "no API endpoint configured; set " + std::string(kEnvApiBase) +
                                       " (e.g. https://api.openai.com/v1) or pass --api-base");
  }
  if (config_.model.empty()) {
    throw Error(Errc::ConfigError, "no model configured; set " + std::string(kEnvModel) + " or pass --model");
  }
  const auto scheme_end = config_.api_base.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::ConfigError, "API base must start with http:// or https://");
  }
  const auto path_start = config_.api_base.find('/', scheme_end + 3);
  scheme_host_port_ = config_.api_base.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? std::string{} : config_.api_base.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (config_.api_base.rfind("https://", 0) == 0) {
    throw Error(Errc::ConfigError, "this build has no TLS support; use an http:// endpoint");
  }
#endif
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(Errc::InvalidArgument, "request without messages");
  const bool chat = config_.endpoint == HttpBackendConfig::Endpoint::Chat;

  Json body{{"model", request.model_id.empty() ? config_.model : request.model_id},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  if (chat) {
    Json messages = Json::array();
    for (const auto& m : request.messages) messages.push_back(Json{{"role", m.role}, {"content", m.text}});
    body["messages"] = std::move(messages);
  } else {
    body["prompt"] = request.messages.back().text;
  }
  const std::string path = path_prefix_ + (chat ? "/chat/completions" : "/completions");
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto started = std::chrono::steady_clock::now();
  Errc last_failure = Errc::BackendError;
  std::string last_detail;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff_delay(config_.retry, attempt - 1));

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto result = client.Post(path, headers, payload, "application/json");
    if (!result) {
      const auto err = result.error();
      last_failure = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) ? Errc::Timeout
                                                                                              : Errc::BackendError;
      last_detail = "transport error: " + httplib::to_string(err);
      continue;
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
      throw Error(Errc::AuthError, "endpoint rejected the credential (HTTP " + std::to_string(status) + ")");
    }
    if (transient_status(status)) {
      last_failure = status == 429 ? Errc::RateLimited : Errc::BackendError;
      last_detail = "HTTP " + std::to_string(status) + ": " + snippet(result->body);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(Errc::BackendError, "HTTP " + std::to_string(status) + ": " + snippet(result->body));
    }

    ChatResponse out;
    try {
      const auto j = Json::parse(result->body);
      const auto& choice = j.at("choices").at(0);
      out.text = chat ? choice.at("message").at("content").get<std::string>() : choice.at("text").get<std::string>();
      if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        out.usage.input_tokens = u->value("prompt_tokens", std::int64_t{0});
        out.usage.output_tokens = u->value("completion_tokens", std::int64_t{0});
      } else {
        for (const auto& m : request.messages) out.usage.input_tokens += estimate_tokens(m.text);
        out.usage.output_tokens = estimate_tokens(out.text);
        out.usage.estimated = true;
      }
    } catch (const Json::exception& e) {
      throw Error(Errc::MalformedResponse, std::string("unexpected response body: ") + e.what());
    }
    out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                         .count();
    return out;
  }
  throw Error(last_failure, "giving up after " + std::to_string(config_.retry.max_retries) +
                                " retries; last failure " + last_detail);
}

}  // namespace tomloom
