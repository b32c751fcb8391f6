#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "tomloom/core.hpp"
#include "tomloom/rng.hpp"

namespace tomloom::testing {

inline std::string fixture(const std::string& rel) { return std::string(TOMLOOM_FIXTURE_DIR) + "/" + rel; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("tomloom-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& rel = "") const { return rel.empty() ? path_.string() : (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

inline ProblemInstance make_problem(const std::string& id, const std::vector<std::string>& sentences,
                                    const std::string& question = "Where is the ball?",
                                    const std::string& gold = "box") {
  ProblemInstance p;
  p.id = id;
  p.benchmark = Benchmark::ToMi;
  for (std::size_t i = 0; i < sentences.size(); ++i) p.sentences.push_back({static_cast<int>(i + 1), sentences[i]});
  p.question = question;
  p.gold_answer = gold;
  return p;
}

inline TrackedObject physical(const std::string& id) {
  return TrackedObject{id, ObjectKind::Physical, 0, {}, id};
}

inline TrackedObject belief(const std::string& id, std::vector<std::string> chain) {
  const int order = static_cast<int>(chain.size());
  return TrackedObject{id, ObjectKind::Belief, order, std::move(chain), id};
}

/// Random valid annotation over a story of `n` sentences: 1..5 objects, each
/// with a random ascending set of boundaries.
inline AnnotationSet random_annotation(Rng& rng, int n, const std::string& id = "rand") {
  AnnotationSet a;
  a.problem_id = id;
  const int objects = 1 + static_cast<int>(rng.below(5));
  for (int k = 0; k < objects; ++k) {
    const std::string oid = "obj" + std::to_string(k);
    a.objects.push_back(physical(oid));
    for (int s = 1; s <= n; ++s) {
      if (rng.below(3) == 0) a.events.push_back({oid, s});
    }
  }
  a.question_object_id = a.objects[rng.below(a.objects.size())].object_id;
  return a;
}

inline ProblemInstance story_of_length(int n, const std::string& id = "rand") {
  std::vector<std::string> s;
  for (int i = 1; i <= n; ++i) s.push_back("Sentence number " + std::to_string(i) + ".");
  return make_problem(id, s);
}

}  // namespace tomloom::testing

#include <mutex>

#include "tomloom/gateway.hpp"

namespace tomloom::testing {

/// Delegates to a MockBackend and keeps every request it saw.
class RecordingBackend final : public ChatBackend {
 public:
  explicit RecordingBackend(MockScript script) : inner_(std::move(script)) {}

  ChatResponse complete(const ChatRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      requests.push_back(request);
    }
    return inner_.complete(request);
  }
  std::string model_id() const override { return inner_.model_id(); }

  /// Text of the last user message of call `i` (0-based).
  std::string last_user(std::size_t i) const {
    const auto& msgs = requests.at(i).messages;
    for (auto it = msgs.rbegin(); it != msgs.rend(); ++it) {
      if (it->role == "user") return it->text;
    }
    return {};
  }

  std::vector<ChatRequest> requests;

 private:
  MockBackend inner_;
  std::mutex mutex_;
};

inline MockScript reply_always(const std::string& text) {
  MockScript s;
  s.default_response = text;
  return s;
}

/// The ToMi story and question behind the golden prompts.
inline ProblemInstance golden_problem() {
  ProblemInstance p;
  p.id = "golden";
  p.benchmark = Benchmark::ToMi;
  const auto story = read_file(fixture("golden_story/story.txt"));
  std::size_t pos = 0;
  int index = 0;
  while (pos < story.size()) {
    auto nl = story.find('\n', pos);
    if (nl == std::string::npos) nl = story.size();
    const auto line = story.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    p.sentences.push_back({++index, line.substr(line.find(". ") + 2)});
  }
  p.question = read_file(fixture("golden_story/question.txt"));
  while (!p.question.empty() && (p.question.back() == '\n' || p.question.back() == ' ')) p.question.pop_back();
  p.gold_answer = "drawer";
  return p;
}

}  // namespace tomloom::testing
