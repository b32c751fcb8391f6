#include "tomloom/service.hpp"

#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include "httplib.h"
#include "tomloom/complexity.hpp"

namespace fs = std::filesystem;

namespace tomloom {

namespace {

constexpr const char* kJson = "application/json";

std::string file_name_for(std::string_view id) {
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '-' || c == '_') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out + ".json";
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(Json{{"error", message}}.dump(), kJson);
}

struct Stored {
  AnnotationSet annotation;
  long version = 0;
};

}  // namespace

struct AnnotationService::Impl {
  ServiceConfig config;
  std::vector<ProblemInstance> problems;
  std::map<std::string, std::size_t> index;  // problem id -> position

  mutable std::shared_mutex store_mutex;  // guards `stored`
  std::map<std::string, Stored> stored;
  std::mutex locks_mutex;
  std::map<std::string, std::unique_ptr<std::mutex>> write_locks;  // per-problem write serialization

  httplib::Server server;
  std::thread thread;
  int bound_port = 0;
  std::mutex state_mutex;
  std::condition_variable stopped_cv;
  bool running = false;

  fs::path annotation_dir() const { return fs::path(config.store_dir) / "annotations"; }

  std::mutex& write_lock(const std::string& id) {
    std::lock_guard lock(locks_mutex);
    auto& slot = write_locks[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  void load_store() {
    std::error_code ec;
    fs::create_directories(annotation_dir(), ec);
    if (ec) throw Error(Errc::Io, "cannot create '" + annotation_dir().string() + "': " + ec.message());
    for (const auto& entry : fs::directory_iterator(annotation_dir())) {
      if (entry.path().extension() != ".json") continue;
      const auto j = Json::parse(read_file(entry.path().string()), nullptr, false);
      if (j.is_discarded() || !j.contains("annotation")) continue;
      Stored s;
      try {
        s.annotation = j.at("annotation").get<AnnotationSet>();
        s.version = j.value("version", 1L);
      } catch (const Json::exception&) {
        continue;
      }
      if (index.count(s.annotation.problem_id)) stored[s.annotation.problem_id] = std::move(s);
    }
  }

  void routes() {
    server.Get("/api/problems", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t offset = 0, limit = 50;
      try {
        if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
        if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
      } catch (const std::exception&) {
        return send_error(res, 400, "offset and limit must be non-negative integers");
      }
      limit = std::clamp<std::size_t>(limit, 1, 500);
      Json items = Json::array();
      for (std::size_t i = offset; i < problems.size() && i < offset + limit; ++i) items.push_back(problems[i]);
      res.set_content(Json{{"total", problems.size()}, {"offset", offset}, {"limit", limit}, {"items", items}}.dump(),
                      kJson);
    });

    server.Get(R"(/api/problems/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto it = index.find(req.matches[1].str());
      if (it == index.end()) return send_error(res, 404, "no problem '" + req.matches[1].str() + "'");
      res.set_content(to_canonical(problems[it->second]), kJson);
    });

    server.Get(R"(/api/annotations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1].str();
      std::shared_lock lock(store_mutex);
      const auto it = stored.find(id);
      if (it == stored.end()) {
        return send_error(res, 404, index.count(id) ? "problem '" + id + "' has no annotation" : "no problem '" + id + "'");
      }
      res.set_header("ETag", "\"" + std::to_string(it->second.version) + "\"");
      res.set_content(to_canonical(it->second.annotation), kJson);
    });

    server.Post("/api/annotations", [this](const httplib::Request& req, httplib::Response& res) {
      AnnotationSet a;
      try {
        a = from_canonical<AnnotationSet>(req.body);
      } catch (const Error& e) {
        return send_error(res, 400, e.what());
      }
      const auto it = index.find(a.problem_id);
      if (it == index.end()) return send_error(res, 404, "no problem '" + a.problem_id + "'");
      const auto violations = validate_annotation(a, problems[it->second]);
      if (!violations.empty()) {
        res.status = 422;
        res.set_content(Json{{"error", "annotation violates its invariants"}, {"violations", violations}}.dump(), kJson);
        return;
      }

      std::lock_guard write(write_lock(a.problem_id));
      long current = 0;
      {
        std::shared_lock lock(store_mutex);
        if (const auto s = stored.find(a.problem_id); s != stored.end()) current = s->second.version;
      }
      if (req.has_header("If-Match")) {
        std::string tag = req.get_header_value("If-Match");
        if (tag.size() >= 2 && tag.front() == '"' && tag.back() == '"') tag = tag.substr(1, tag.size() - 2);
        if (tag != "*" && tag != std::to_string(current)) {
          res.status = 409;
          res.set_content(Json{{"error", "version conflict"}, {"current_version", current}}.dump(), kJson);
          return;
        }
      }
      Stored s{a, current + 1};
      write_file_atomic((annotation_dir() / file_name_for(a.problem_id)).string(),
                        Json{{"version", s.version}, {"annotation", a}}.dump());
      {
        std::unique_lock lock(store_mutex);
        stored[a.problem_id] = s;
      }
      res.status = 201;
      res.set_header("ETag", "\"" + std::to_string(s.version) + "\"");
      res.set_content(Json{{"problem_id", a.problem_id}, {"version", s.version}}.dump(), kJson);
    });

    server.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      std::vector<AnnotationSet> all;
      {
        std::shared_lock lock(store_mutex);
        for (const auto& [id, s] : stored) all.push_back(s.annotation);
      }
      res.set_header("Content-Disposition", "attachment; filename=\"annotations.tomann.json\"");
      res.set_content(annotation_bundle(all), kJson);
    });

    server.Get("/api/stats", [this](const httplib::Request& req, httplib::Response& res) {
      double tau = kDefaultTau;
      try {
        if (req.has_param("tau")) tau = std::stod(req.get_param_value("tau"));
      } catch (const std::exception&) {
        return send_error(res, 400, "tau must be a number");
      }
      std::map<Benchmark, std::vector<ComplexityReport>> groups;
      Json reports = Json::array();
      try {
        std::shared_lock lock(store_mutex);
        for (const auto& [id, s] : stored) {
          auto r = complexity(s.annotation, tau);
          reports.push_back(r);
          groups[problems[index.at(id)].benchmark].push_back(std::move(r));
        }
      } catch (const Error& e) {
        return send_error(res, 422, e.what());
      }
      Json benchmarks = Json::array();
      for (const auto& s : aggregate_stats(groups)) benchmarks.push_back(s);
      res.set_content(Json{{"tau", tau}, {"benchmarks", benchmarks}, {"reports", reports}}.dump(), kJson);
    });

    if (config.static_dir && !server.set_mount_point("/", *config.static_dir)) {
      throw Error(Errc::ConfigError, "static directory '" + *config.static_dir + "' does not exist");
    }
  }
};

AnnotationService::AnnotationService(std::vector<ProblemInstance> problems, ServiceConfig config)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  impl_->problems = std::move(problems);
  for (std::size_t i = 0; i < impl_->problems.size(); ++i) {
    if (!impl_->index.emplace(impl_->problems[i].id, i).second) {
      throw Error(Errc::InvalidArgument, "duplicate problem id '" + impl_->problems[i].id + "'");
    }
  }
}

AnnotationService::~AnnotationService() { stop(); }

void AnnotationService::start() {
  impl_->load_store();
  impl_->routes();
  auto& server = impl_->server;
  // Without SO_REUSEPORT a second service on the same port fails to bind.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  if (impl_->config.port == 0) {
    impl_->bound_port = server.bind_to_any_port(impl_->config.host);
  } else if (server.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->bound_port = impl_->config.port;
  } else {
    impl_->bound_port = -1;
  }
  if (impl_->bound_port <= 0) {
    throw Error(Errc::PortInUse,
                "cannot listen on " + impl_->config.host + ":" + std::to_string(impl_->config.port) + " (port in use?)");
  }
  {
    std::lock_guard lock(impl_->state_mutex);
    impl_->running = true;
  }
  impl_->thread = std::thread([this] {
    impl_->server.listen_after_bind();
    std::lock_guard lock(impl_->state_mutex);
    impl_->running = false;
    impl_->stopped_cv.notify_all();
  });
  impl_->server.wait_until_ready();
}

void AnnotationService::wait() {
  std::unique_lock lock(impl_->state_mutex);
  impl_->stopped_cv.wait(lock, [this] { return !impl_->running; });
}

void AnnotationService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int AnnotationService::port() const noexcept { return impl_->bound_port; }

}  // namespace tomloom
