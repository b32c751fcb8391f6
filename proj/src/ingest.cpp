#include "tomloom/ingest.hpp"

#include <algorithm>
#include <cctype>

#include "tomloom/rng.hpp"

namespace tomloom {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

// Words whose trailing period does not end a sentence.
bool is_abbreviation(std::string_view piece) {
  static constexpr std::string_view kAbbrev[] = {"Mr.", "Mrs.", "Ms.", "Dr.", "St.", "Prof.", "vs.", "e.g.", "i.e."};
  for (auto a : kAbbrev) {
    if (piece.size() >= a.size() && piece.substr(piece.size() - a.size()) == a &&
        (piece.size() == a.size() || is_space(piece[piece.size() - a.size() - 1]))) {
      return true;
    }
  }
  return false;
}

void split_line(std::string_view line, std::vector<std::string>& out) {
  std::size_t start = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t end = i + 1;
    while (end < line.size() && (line[end] == '"' || line[end] == '\'' || line[end] == ')')) ++end;
    if (end < line.size() && !is_space(line[end])) continue;
    if (c == '.' && is_abbreviation(line.substr(start, end - start))) continue;
    if (auto piece = trim(line.substr(start, end - start)); !piece.empty()) out.push_back(std::move(piece));
    start = end;
    i = end - 1;
  }
  if (auto piece = trim(line.substr(start)); !piece.empty()) out.push_back(std::move(piece));
}

std::vector<Sentence> to_sentences(const std::vector<std::string>& texts) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({static_cast<int>(i) + 1, texts[i]});
  return out;
}

std::string id_prefix(Benchmark b) {
  std::string out(to_string(b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what);
}

void check(ProblemInstance& p, std::size_t line) {
  if (p.sentences.empty()) throw Error(Errc::EmptyStory, "line " + std::to_string(line) + ": story has no sentences");
  const auto issues = validate_problem(p);
  if (!issues.empty()) fail_at(line, "invalid problem '" + p.id + "': " + issues.front());
}

// "12 text" or "12. text" -> (12, "text").
std::pair<int, std::string_view> numbered(std::string_view line, std::size_t line_no) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i > 6) fail_at(line_no, "expected a numbered line");
  const int n = std::stoi(std::string(line.substr(0, i)));
  if (i < line.size() && line[i] == '.') ++i;
  if (i >= line.size() || !is_space(line[i])) fail_at(line_no, "expected a space after the line number");
  return {n, line.substr(i + 1)};
}

std::vector<ProblemInstance> parse_tomi(std::string_view text) {
  std::vector<ProblemInstance> out;
  std::vector<std::string> story;
  int expected = 1;
  std::size_t story_start = 1;
  const auto lines = lines_of(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const auto line = lines[li];
    if (trim(line).empty()) continue;
    auto [n, body] = numbered(line, line_no);
    if (n == 1 && expected != 1) fail_at(line_no, "story restarted before its question line");
    if (n != expected) {
      fail_at(line_no, "expected line number " + std::to_string(expected) + ", got " + std::to_string(n));
    }
    if (n == 1) story_start = line_no;
    ++expected;
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) {
      split_line(body, story);
      continue;
    }
    ProblemInstance p;
    p.id = id_prefix(Benchmark::ToMi) + "-" + std::to_string(out.size());
    p.benchmark = Benchmark::ToMi;
    p.sentences = to_sentences(story);
    p.question = trim(body.substr(0, tab));
    auto rest = body.substr(tab + 1);
    const auto tab2 = rest.find('\t');
    p.gold_answer = trim(rest.substr(0, tab2));
    if (p.question.empty()) fail_at(line_no, "question line has no question");
    if (p.gold_answer.empty()) fail_at(line_no, "question line has no answer");
    if (tab2 != std::string_view::npos) p.metadata["extra"] = trim(rest.substr(tab2 + 1));
    if (p.sentences.empty()) throw Error(Errc::EmptyStory, "line " + std::to_string(story_start) + ": story has no sentences");
    check(p, line_no);
    out.push_back(std::move(p));
    story.clear();
    expected = 1;
  }
  if (expected != 1) fail_at(lines.size(), "story starting at line " + std::to_string(story_start) + " has no question line");
  return out;
}

std::string field(const Json& row, const char* name, std::size_t line_no) {
  const auto it = row.find(name);
  if (it == row.end() || it->is_null()) fail_at(line_no, std::string("missing field \"") + name + "\"");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  fail_at(line_no, std::string("field \"") + name + "\" must be a string");
}

std::optional<std::vector<std::string>> optional_choices(const Json& row, std::size_t line_no) {
  const auto it = row.find("choices");
  if (it == row.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) fail_at(line_no, "\"choices\" must be an array of strings");
  std::vector<std::string> out;
  for (const auto& c : *it) {
    if (!c.is_string()) fail_at(line_no, "\"choices\" must be an array of strings");
    out.push_back(c.get<std::string>());
  }
  return out;
}

ProblemInstance from_native_row(Benchmark b, const Json& row, std::size_t line_no) {
  ProblemInstance p;
  p.benchmark = b;
  std::vector<std::string> texts;
  switch (b) {
    case Benchmark::SocialIQa: {
      texts = split_story(field(row, "context", line_no));
      p.question = field(row, "question", line_no);
      p.choices = std::vector<std::string>{field(row, "answerA", line_no), field(row, "answerB", line_no),
                                           field(row, "answerC", line_no)};
      const auto label = trim(field(row, "label", line_no));
      if (label != "1" && label != "2" && label != "3") fail_at(line_no, "label must be 1, 2 or 3");
      p.gold_answer = (*p.choices)[static_cast<std::size_t>(label[0] - '1')];
      break;
    }
    case Benchmark::MindGames: {
      texts = split_story(field(row, "premise", line_no));
      p.question = field(row, "hypothesis", line_no);
      p.choices = optional_choices(row, line_no);
      if (!p.choices) p.choices = std::vector<std::string>{"entailment", "not_entailment"};
      p.gold_answer = field(row, "label", line_no);
      break;
    }
    case Benchmark::AdvCSFB:
      texts = split_story(field(row, "story", line_no));
      p.question = field(row, "question", line_no);
      p.gold_answer = field(row, "answer", line_no);
      p.choices = optional_choices(row, line_no);
      break;
    case Benchmark::FANToM: {
      const auto context = field(row, "context", line_no);
      for (auto line : lines_of(context)) {
        if (auto t = trim(line); !t.empty()) texts.push_back(std::move(t));
      }
      p.question = field(row, "question", line_no);
      p.gold_answer = field(row, "answer", line_no);
      p.choices = optional_choices(row, line_no);
      break;
    }
    default:
      throw Error(Errc::UnknownBenchmark,
                  "no native loader for " + std::string(to_string(b)) + "; supply normalized JSONL instead");
  }
  p.sentences = to_sentences(texts);
  if (const auto it = row.find("id"); it != row.end() && it->is_string()) p.metadata["source_id"] = it->get<std::string>();
  return p;
}

std::vector<ProblemInstance> parse_jsonl(Benchmark b, std::string_view text, std::size_t* passthrough) {
  std::vector<ProblemInstance> out;
  const auto lines = lines_of(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty()) continue;
    Json row;
    try {
      row = Json::parse(lines[li]);
    } catch (const Json::exception& e) {
      fail_at(line_no, std::string("not valid JSON: ") + e.what());
    }
    if (!row.is_object()) fail_at(line_no, "expected a JSON object");
    ProblemInstance p;
    if (row.contains("sentences")) {
      try {
        p = row.get<ProblemInstance>();
        if (passthrough) ++*passthrough;
      } catch (const Json::exception& e) {
        fail_at(line_no, std::string("malformed normalized row: ") + e.what());
      }
    } else {
      p = from_native_row(b, row, line_no);
      p.id = id_prefix(b) + "-" + std::to_string(out.size());
    }
    check(p, line_no);
    out.push_back(std::move(p));
  }
  return out;
}

bool looks_like_jsonl(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  return first != std::string_view::npos && text[first] == '{';
}

}  // namespace

std::vector<std::string> split_story(std::string_view story) {
  std::vector<std::string> out;
  for (auto line : lines_of(story)) split_line(line, out);
  return out;
}

std::vector<ProblemInstance> parse_dataset(Benchmark benchmark, std::string_view text) {
  if (benchmark == Benchmark::ToMi && !looks_like_jsonl(text)) return parse_tomi(text);
  return parse_jsonl(benchmark, text, nullptr);
}

IngestReport ingest(Benchmark benchmark, const std::string& input_path, const std::string& output_path) {
  const auto text = read_file(input_path);
  IngestReport report;
  const auto problems = benchmark == Benchmark::ToMi && !looks_like_jsonl(text)
                            ? parse_tomi(text)
                            : parse_jsonl(benchmark, text, &report.passthrough);
  std::vector<std::string> ids;
  for (const auto& p : problems) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    throw Error(Errc::ParseError, "duplicate problem id '" + *dup + "'");
  }
  save_problems(output_path, problems);
  report.count = problems.size();
  return report;
}

std::vector<ProblemInstance> sample(const std::vector<ProblemInstance>& dataset, std::size_t n, std::uint64_t seed) {
  if (n > dataset.size()) {
    throw Error(Errc::SampleTooLarge,
                "asked for " + std::to_string(n) + " problems but the dataset has " + std::to_string(dataset.size()));
  }
  Rng rng(seed);
  std::vector<ProblemInstance> out;
  out.reserve(n);
  for (auto i : rng.sample_indices(dataset.size(), n)) out.push_back(dataset[i]);
  return out;
}

}  // namespace tomloom
