#pragma once

// REST service behind the annotation UI.
//
//   GET  /api/problems?offset=&limit=   paged problem list
//   GET  /api/problems/{id}             one problem
//   GET  /api/annotations/{id}          stored annotation (canonical JSON), ETag = version
//   POST /api/annotations               store; 201, 400 bad JSON, 404 unknown problem,
//                                       422 violations, 409 If-Match mismatch
//   GET  /api/export                    every annotation as a .tomann.json bundle
//   GET  /api/stats?tau=                per-benchmark statefulness/statelessness
//
// Annotations live in <store>/annotations/<problem>.json and are replaced atomically.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tomloom/core.hpp"

namespace tomloom {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string store_dir = "annotations";
  std::optional<std::string> static_dir;  // served at "/" when set
};

class AnnotationService {
 public:
  AnnotationService(std::vector<ProblemInstance> problems, ServiceConfig config);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Binds and serves on a background thread. Throws Error{PortInUse}.
  void start();
  /// Blocks until stop() is called from another thread.
  void wait();
  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tomloom
