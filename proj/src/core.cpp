#include "tomloom/core.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace tomloom {

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string_view to_string(Benchmark b) noexcept {
  switch (b) {
    case Benchmark::ToMi: return "ToMi";
    case Benchmark::MindGames: return "MindGames";
    case Benchmark::AdvCSFB: return "AdvCSFB";
    case Benchmark::SocialIQa: return "SocialIQa";
    case Benchmark::FANToM: return "FANToM";
    case Benchmark::Synthetic: return "Synthetic";
    case Benchmark::Other: return "Other";
  }
  return "Other";
}

Benchmark parse_benchmark(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "tomi") return Benchmark::ToMi;
  if (key == "mindgames") return Benchmark::MindGames;
  if (key == "advcsfb") return Benchmark::AdvCSFB;
  if (key == "socialiqa") return Benchmark::SocialIQa;
  if (key == "fantom") return Benchmark::FANToM;
  if (key == "synthetic") return Benchmark::Synthetic;
  if (key == "other") return Benchmark::Other;
  throw Error(Errc::UnknownBenchmark, "unknown benchmark '" + std::string(name) + "'");
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_answer(std::string_view text) {
  std::string out = normalize_whitespace(lower_ascii(text));
  constexpr std::string_view kTerminal = ".,;:!?\"'`";
  while (!out.empty() && (kTerminal.find(out.back()) != std::string_view::npos || is_space(out.back()))) {
    out.pop_back();
  }
  return out;
}

std::vector<std::string> validate_problem(const ProblemInstance& p) {
  std::vector<std::string> issues;
  if (p.id.empty()) issues.emplace_back("empty id");
  if (p.sentences.empty()) issues.emplace_back("no sentences");
  for (std::size_t i = 0; i < p.sentences.size(); ++i) {
    const auto& s = p.sentences[i];
    if (s.index != static_cast<int>(i) + 1) {
      issues.push_back("sentence " + std::to_string(i + 1) + " has index " + std::to_string(s.index));
    }
    if (s.text.empty()) issues.push_back("sentence " + std::to_string(s.index) + " is empty");
    if (s.text.find_first_of("\r\n") != std::string::npos) {
      issues.push_back("sentence " + std::to_string(s.index) + " contains a line break");
    }
  }
  if (p.question.empty()) issues.emplace_back("empty question");
  if (p.choices) {
    const auto gold = normalize_answer(p.gold_answer);
    const auto hits = std::count_if(p.choices->begin(), p.choices->end(),
                                    [&](const std::string& c) { return normalize_answer(c) == gold; });
    if (hits != 1) {
      issues.push_back("gold answer '" + p.gold_answer + "' matches " + std::to_string(hits) + " choices");
    }
  }
  return issues;
}

std::string render_story(const ProblemInstance& p, int first, int last) {
  std::string out;
  for (int i = first; i <= last; ++i) {
    if (i > first) out.push_back('\n');
    const auto& s = p.sentences.at(static_cast<std::size_t>(i - 1));
    out += std::to_string(s.index);
    out += ". ";
    out += s.text;
  }
  return out;
}

std::string render_story(const ProblemInstance& p) { return render_story(p, 1, p.size()); }

std::string render_belief(const std::vector<std::string>& owner_chain, std::string_view object,
                          std::string_view value) {
  std::string out = "believes(";
  for (std::size_t i = 0; i < owner_chain.size(); ++i) {
    if (i) out.push_back('>');
    out += owner_chain[i];
  }
  out += ", ";
  out += object;
  out.push_back('=');
  out += value;
  out.push_back(')');
  return out;
}

const TrackedObject* AnnotationSet::find_object(std::string_view object_id) const noexcept {
  auto it = std::find_if(objects.begin(), objects.end(),
                         [&](const TrackedObject& o) { return o.object_id == object_id; });
  return it == objects.end() ? nullptr : &*it;
}

std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::ProblemMismatch: return "ProblemMismatch";
    case ViolationKind::OutOfRange: return "OutOfRange";
    case ViolationKind::DanglingObject: return "DanglingObject";
    case ViolationKind::DuplicateObject: return "DuplicateObject";
    case ViolationKind::DuplicateEvent: return "DuplicateEvent";
    case ViolationKind::UnsortedEvents: return "UnsortedEvents";
    case ViolationKind::InconsistentObject: return "InconsistentObject";
  }
  return "Unknown";
}

std::vector<Violation> validate_annotation(const AnnotationSet& a, const ProblemInstance& p) {
  std::vector<Violation> out;
  if (a.problem_id != p.id) {
    out.push_back({ViolationKind::ProblemMismatch, "",
                   "annotation for '" + a.problem_id + "' checked against problem '" + p.id + "'"});
  }

  std::set<std::string> ids;
  for (const auto& o : a.objects) {
    if (o.object_id.empty()) {
      out.push_back({ViolationKind::InconsistentObject, o.object_id, "empty object_id"});
    }
    if (!ids.insert(o.object_id).second) {
      out.push_back({ViolationKind::DuplicateObject, o.object_id, "object_id declared twice"});
    }
    const bool physical = o.kind == ObjectKind::Physical;
    const bool consistent = physical ? (o.belief_order == 0 && o.owner_chain.empty())
                                     : (o.belief_order >= 1 &&
                                        static_cast<int>(o.owner_chain.size()) == o.belief_order);
    if (!consistent) {
      out.push_back({ViolationKind::InconsistentObject, o.object_id,
                     "kind, belief_order and owner_chain disagree"});
    }
  }

  std::set<std::pair<std::string, int>> seen;
  std::map<std::string, int> last_boundary;
  for (const auto& e : a.events) {
    if (!ids.contains(e.object_id)) {
      out.push_back({ViolationKind::DanglingObject, e.object_id, "event refers to an undeclared object"});
    }
    if (e.boundary_after_sentence < 1 || e.boundary_after_sentence > p.size()) {
      out.push_back({ViolationKind::OutOfRange, e.object_id,
                     "event at sentence " + std::to_string(e.boundary_after_sentence) + " outside [1, " +
                         std::to_string(p.size()) + "]"});
    }
    if (!seen.emplace(e.object_id, e.boundary_after_sentence).second) {
      out.push_back({ViolationKind::DuplicateEvent, e.object_id,
                     "event at sentence " + std::to_string(e.boundary_after_sentence) + " repeated"});
      continue;
    }
    auto [it, fresh] = last_boundary.try_emplace(e.object_id, e.boundary_after_sentence);
    if (!fresh) {
      if (e.boundary_after_sentence < it->second) {
        out.push_back({ViolationKind::UnsortedEvents, e.object_id, "events are not in ascending order"});
      }
      it->second = std::max(it->second, e.boundary_after_sentence);
    }
  }

  if (!ids.contains(a.question_object_id)) {
    out.push_back({ViolationKind::DanglingObject, a.question_object_id,
                   "question_object_id does not name a declared object"});
  }
  return out;
}

// --- JSON -----------------------------------------------------------------

void to_json(Json& j, const Sentence& s) { j = Json{{"index", s.index}, {"text", s.text}}; }

void from_json(const Json& j, Sentence& s) {
  j.at("index").get_to(s.index);
  j.at("text").get_to(s.text);
}

void to_json(Json& j, const ProblemInstance& p) {
  j = Json{{"id", p.id},
           {"benchmark", to_string(p.benchmark)},
           {"sentences", p.sentences},
           {"question", p.question},
           {"gold_answer", p.gold_answer},
           {"metadata", p.metadata}};
  if (p.choices) j["choices"] = *p.choices;
}

void from_json(const Json& j, ProblemInstance& p) {
  j.at("id").get_to(p.id);
  p.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
  j.at("sentences").get_to(p.sentences);
  j.at("question").get_to(p.question);
  j.at("gold_answer").get_to(p.gold_answer);
  if (auto it = j.find("choices"); it != j.end() && !it->is_null()) {
    p.choices = it->get<std::vector<std::string>>();
  } else {
    p.choices.reset();
  }
  p.metadata.clear();
  if (auto it = j.find("metadata"); it != j.end()) it->get_to(p.metadata);
}

void to_json(Json& j, const TrackedObject& o) {
  j = Json{{"object_id", o.object_id},
           {"kind", o.kind == ObjectKind::Physical ? "Physical" : "Belief"},
           {"belief_order", o.belief_order},
           {"owner_chain", o.owner_chain},
           {"label", o.label}};
}

void from_json(const Json& j, TrackedObject& o) {
  j.at("object_id").get_to(o.object_id);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "Physical") {
    o.kind = ObjectKind::Physical;
  } else if (kind == "Belief") {
    o.kind = ObjectKind::Belief;
  } else {
    throw Error(Errc::ParseError, "unknown object kind '" + kind + "'");
  }
  j.at("belief_order").get_to(o.belief_order);
  j.at("owner_chain").get_to(o.owner_chain);
  o.label = j.value("label", std::string{});
}

void to_json(Json& j, const StateDescription& d) {
  j = Json{{"object_id", d.object_id}, {"time", d.time}, {"value", d.value}, {"prefix_end", d.prefix_end}};
}

void from_json(const Json& j, StateDescription& d) {
  j.at("object_id").get_to(d.object_id);
  j.at("time").get_to(d.time);
  j.at("value").get_to(d.value);
  j.at("prefix_end").get_to(d.prefix_end);
}

void to_json(Json& j, const StateEventMark& e) {
  j = Json{{"object_id", e.object_id}, {"boundary_after_sentence", e.boundary_after_sentence}};
}

void from_json(const Json& j, StateEventMark& e) {
  j.at("object_id").get_to(e.object_id);
  j.at("boundary_after_sentence").get_to(e.boundary_after_sentence);
}

void to_json(Json& j, const AnnotationSet& a) {
  j = Json{{"problem_id", a.problem_id},
           {"objects", a.objects},
           {"events", a.events},
           {"question_object_id", a.question_object_id}};
}

void from_json(const Json& j, AnnotationSet& a) {
  j.at("problem_id").get_to(a.problem_id);
  j.at("objects").get_to(a.objects);
  j.at("events").get_to(a.events);
  j.at("question_object_id").get_to(a.question_object_id);
}

void to_json(Json& j, const ComplexityReport& r) {
  j = Json{{"problem_id", r.problem_id},
           {"statefulness", r.statefulness},
           {"statelessness_raw", r.statelessness_raw},
           {"tau", r.tau},
           {"complexity", r.complexity}};
}

void from_json(const Json& j, ComplexityReport& r) {
  j.at("problem_id").get_to(r.problem_id);
  j.at("statefulness").get_to(r.statefulness);
  j.at("statelessness_raw").get_to(r.statelessness_raw);
  j.at("tau").get_to(r.tau);
  j.at("complexity").get_to(r.complexity);
}

void to_json(Json& j, const Violation& v) {
  j = Json{{"kind", to_string(v.kind)}, {"object_id", v.object_id}, {"detail", v.detail}};
}

// --- files ----------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid()) + "." +
                       std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::Io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(Errc::Io, "cannot rename onto '" + path + "': " + ec.message());
  }
}

std::vector<ProblemInstance> load_problems(const std::string& jsonl_path) {
  std::istringstream in(read_file(jsonl_path));
  std::vector<ProblemInstance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (normalize_whitespace(line).empty()) continue;
    try {
      out.push_back(Json::parse(line).get<ProblemInstance>());
    } catch (const Json::exception& e) {
      throw Error(Errc::ParseError, jsonl_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_problems(const std::string& jsonl_path, const std::vector<ProblemInstance>& problems) {
  std::string body;
  for (const auto& p : problems) {
    body += to_canonical(p);
    body.push_back('\n');
  }
  write_file_atomic(jsonl_path, body);
}

std::vector<AnnotationSet> parse_annotations(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    if (j.is_array()) return j.get<std::vector<AnnotationSet>>();
    if (j.is_object() && j.contains("annotations")) {
      return j.at("annotations").get<std::vector<AnnotationSet>>();
    }
    return {j.get<AnnotationSet>()};
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

std::vector<AnnotationSet> load_annotations(const std::string& path) {
  try {
    return parse_annotations(read_file(path));
  } catch (const Error& e) {
    if (e.code() != Errc::ParseError) throw;
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

std::string annotation_bundle(const std::vector<AnnotationSet>& annotations) {
  Json j{{"format", "tomann"}, {"version", 1}, {"annotations", annotations}};
  return j.dump(2) + "\n";
}

void save_annotations(const std::string& path, const std::vector<AnnotationSet>& annotations) {
  write_file_atomic(path, annotation_bundle(annotations));
}

}  // namespace tomloom
