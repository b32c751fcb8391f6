#pragma once

// Domain types shared by every tomloom module: problems, tracked objects,
// state descriptions, state-event annotations and complexity reports.
//
// All types are plain values with a canonical JSON form (keys sorted, compact),
// so serialize -> parse -> serialize is byte-stable.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tomloom/error.hpp"

namespace tomloom {

using Json = nlohmann::json;

enum class Benchmark { ToMi, MindGames, AdvCSFB, SocialIQa, FANToM, Synthetic, Other };

std::string_view to_string(Benchmark b) noexcept;
/// Accepts the canonical names plus common spellings ("tomi", "adv-csfb", ...).
Benchmark parse_benchmark(std::string_view name);

/// One atomic prompt: a single line of the normalized story.
struct Sentence {
  int index = 0;  // 1-based
  std::string text;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct ProblemInstance {
  std::string id;
  Benchmark benchmark = Benchmark::Other;
  std::vector<Sentence> sentences;
  std::string question;
  std::optional<std::vector<std::string>> choices;
  std::string gold_answer;
  std::map<std::string, std::string> metadata;

  int size() const noexcept { return static_cast<int>(sentences.size()); }
  bool multiple_choice() const noexcept { return choices.has_value() && !choices->empty(); }

  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

/// Answer normalization used everywhere answers are compared: lowercase, trim,
/// strip terminal punctuation, collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view text);
/// Collapse whitespace runs to single spaces and trim.
std::string normalize_whitespace(std::string_view text);

/// Invariant violations of a ProblemInstance, as human-readable strings.
std::vector<std::string> validate_problem(const ProblemInstance& p);

/// Story lines "i. text" for sentences first..last (1-based, inclusive), joined by '\n'.
std::string render_story(const ProblemInstance& p, int first, int last);
std::string render_story(const ProblemInstance& p);

enum class ObjectKind { Physical, Belief };

struct TrackedObject {
  std::string object_id;
  ObjectKind kind = ObjectKind::Physical;
  int belief_order = 0;
  std::vector<std::string> owner_chain;  // outermost believer first
  std::string label;

  friend bool operator==(const TrackedObject&, const TrackedObject&) = default;
};

/// Initial value of every object before the first sentence.
inline constexpr std::string_view kBottom = "⊥";

/// Canonical rendering of a belief value, e.g. "believes(Anne>Bob, apple=basket)".
std::string render_belief(const std::vector<std::string>& owner_chain, std::string_view object,
                          std::string_view value);

/// The pair (environment state, prompt prefix) for one object at one time.
struct StateDescription {
  std::string object_id;
  int time = 0;
  std::string value;
  int prefix_end = 0;

  friend bool operator==(const StateDescription&, const StateDescription&) = default;
};

/// The configuration of `object_id` changed when sentence `boundary_after_sentence` was read.
struct StateEventMark {
  std::string object_id;
  int boundary_after_sentence = 0;

  friend bool operator==(const StateEventMark&, const StateEventMark&) = default;
};

struct AnnotationSet {
  std::string problem_id;
  std::vector<TrackedObject> objects;
  std::vector<StateEventMark> events;
  std::string question_object_id;

  const TrackedObject* find_object(std::string_view object_id) const noexcept;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

struct ComplexityReport {
  std::string problem_id;
  int statefulness = 0;
  int statelessness_raw = 0;
  double tau = 0.0;
  double complexity = 0.0;

  friend bool operator==(const ComplexityReport&, const ComplexityReport&) = default;
};

enum class ViolationKind {
  ProblemMismatch,
  OutOfRange,
  DanglingObject,
  DuplicateObject,
  DuplicateEvent,
  UnsortedEvents,
  InconsistentObject,
};

std::string_view to_string(ViolationKind k) noexcept;

struct Violation {
  ViolationKind kind;
  std::string object_id;
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty iff every AnnotationSet invariant holds against `p`.
std::vector<Violation> validate_annotation(const AnnotationSet& a, const ProblemInstance& p);

// --- canonical JSON -------------------------------------------------------

void to_json(Json& j, const Sentence& s);
void from_json(const Json& j, Sentence& s);
void to_json(Json& j, const ProblemInstance& p);
void from_json(const Json& j, ProblemInstance& p);
void to_json(Json& j, const TrackedObject& o);
void from_json(const Json& j, TrackedObject& o);
void to_json(Json& j, const StateDescription& d);
void from_json(const Json& j, StateDescription& d);
void to_json(Json& j, const StateEventMark& e);
void from_json(const Json& j, StateEventMark& e);
void to_json(Json& j, const AnnotationSet& a);
void from_json(const Json& j, AnnotationSet& a);
void to_json(Json& j, const ComplexityReport& r);
void from_json(const Json& j, ComplexityReport& r);
void to_json(Json& j, const Violation& v);

/// Compact, key-sorted JSON text.
template <typename T>
std::string to_canonical(const T& value) {
  return Json(value).dump();
}

/// Parses one entity; malformed input raises Error{ParseError}.
template <typename T>
T from_canonical(std::string_view text) {
  try {
    return Json::parse(text).get<T>();
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

// --- files ----------------------------------------------------------------

std::string read_file(const std::string& path);
/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file_atomic(const std::string& path, std::string_view content);

std::vector<ProblemInstance> load_problems(const std::string& jsonl_path);
void save_problems(const std::string& jsonl_path, const std::vector<ProblemInstance>& problems);

/// `.tomann.json` accepts a single AnnotationSet, a JSON array, or a bundle
/// object {"format": "tomann", "annotations": [...]}.
std::vector<AnnotationSet> parse_annotations(std::string_view text);
std::vector<AnnotationSet> load_annotations(const std::string& path);
std::string annotation_bundle(const std::vector<AnnotationSet>& annotations);
void save_annotations(const std::string& path, const std::vector<AnnotationSet>& annotations);

}  // namespace tomloom
