#include "tomloom/gateway.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace tomloom {

std::int64_t estimate_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      in_word = false;
    } else if (std::isalnum(c) || c >= 0x80) {
      if (!in_word) ++n;
      in_word = true;
    } else {
      ++n;
      in_word = false;
    }
  }
  return n;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::BackendError, "sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string cache_key(const ChatRequest& request) {
  Json messages = Json::array();
  for (const auto& m : request.messages) messages.push_back(Json{{"role", m.role}, {"text", m.text}});
  Json j{{"model_id", request.model_id},
         {"messages", messages},
         {"temperature", request.temperature},
         {"max_tokens", request.max_tokens},
         {"seed", request.seed ? Json(*request.seed) : Json(nullptr)}};
  return sha256_hex(j.dump());
}

// --- mock -----------------------------------------------------------------

MockScript MockScript::parse(std::string_view json_text) {
  MockScript script;
  try {
    const auto j = Json::parse(json_text);
    for (const auto& r : j.value("rules", Json::array())) {
      MockRule rule;
      if (r.contains("contains")) {
        rule.kind = MockRule::Kind::Substring;
        rule.matcher = r.at("contains").get<std::string>();
      } else if (r.contains("pattern")) {
        rule.kind = MockRule::Kind::Pattern;
        rule.matcher = r.at("pattern").get<std::string>();
      } else {
        throw Error(Errc::ParseError, "mock rule needs \"contains\" or \"pattern\"");
      }
      rule.response = r.at("response").get<std::string>();
      script.rules.push_back(std::move(rule));
    }
    script.default_response = j.value("default_response", std::string{});
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("mock script: ") + e.what());
  }
  return script;
}

MockScript MockScript::load(const std::string& path) { return parse(read_file(path)); }

MockBackend::MockBackend(MockScript script, std::string model_id)
    : script_(std::move(script)), model_id_(std::move(model_id)) {
  for (const auto& rule : script_.rules) {
    if (rule.kind == MockRule::Kind::Pattern) {
      try {
        compiled_.emplace_back(std::regex(rule.matcher, std::regex::ECMAScript));
      } catch (const std::regex_error& e) {
        throw Error(Errc::ParseError, "bad mock pattern '" + rule.matcher + "': " + e.what());
      }
    } else {
      compiled_.emplace_back(std::nullopt);
    }
  }
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(Errc::InvalidArgument, "request without messages");
  ++calls_;
  std::string_view last_user;
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == "user") {
      last_user = it->text;
      break;
    }
  }
  const std::string* reply = &script_.default_response;
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    const auto& rule = script_.rules[i];
    const bool hit = compiled_[i] ? std::regex_search(last_user.begin(), last_user.end(), *compiled_[i])
                                  : last_user.find(rule.matcher) != std::string_view::npos;
    if (hit) {
      reply = &rule.response;
      break;
    }
  }
  ChatResponse out;
  out.text = *reply;
  for (const auto& m : request.messages) out.usage.input_tokens += estimate_tokens(m.text);
  out.usage.output_tokens = estimate_tokens(out.text);
  out.usage.estimated = true;
  return out;
}

// --- cache ------------------------------------------------------------------

std::filesystem::path default_cache_dir() {
  const char* home = std::getenv("HOME");
  return std::filesystem::path(home ? home : ".") / ".tomloom" / "cache";
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::Io, "cannot create cache directory '" + dir_.string() + "': " + ec.message());
}

std::mutex& ResponseCache::stripe(const std::string& key) const {
  return stripes_[std::hash<std::string>{}(key) % stripes_.size()];
}

std::optional<ChatResponse> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(stripe(key));
  const auto path = dir_ / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const auto j = Json::parse(in);
    ChatResponse r;
    r.text = j.at("text").get<std::string>();
    r.usage.input_tokens = j.at("input_tokens").get<std::int64_t>();
    r.usage.output_tokens = j.at("output_tokens").get<std::int64_t>();
    r.usage.estimated = j.value("estimated", false);
    r.cached = true;
    return r;
  } catch (const Json::exception&) {
    return std::nullopt;  // unreadable entries are treated as misses and overwritten
  }
}

void ResponseCache::put(const std::string& key, const ChatResponse& response) {
  std::lock_guard lock(stripe(key));
  Json j{{"text", response.text},
         {"input_tokens", response.usage.input_tokens},
         {"output_tokens", response.usage.output_tokens},
         {"estimated", response.usage.estimated}};
  write_file_atomic((dir_ / (key + ".json")).string(), j.dump());
}

CachingBackend::CachingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

ChatResponse CachingBackend::complete(const ChatRequest& request) {
  const bool cacheable = request.temperature == 0.0 || request.seed.has_value();
  if (!cacheable) return inner_->complete(request);
  const auto key = cache_key(request);
  if (auto hit = cache_->get(key)) return *hit;
  auto response = inner_->complete(request);
  cache_->put(key, response);
  response.cached = false;
  return response;
}

LimitedBackend::LimitedBackend(std::shared_ptr<ChatBackend> inner, int max_in_flight)
    : inner_(std::move(inner)), slots_(std::clamp(max_in_flight, 1, 1024)) {}

ChatResponse LimitedBackend::complete(const ChatRequest& request) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_->complete(request);
}

}  // namespace tomloom
