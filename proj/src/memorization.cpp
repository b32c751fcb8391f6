#include "tomloom/memorization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tomloom/complexity.hpp"
#include "tomloom/parallel.hpp"

namespace tomloom {

namespace {

std::u32string code_points(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    bool ok = len > 0 && i + static_cast<std::size_t>(len) <= s.size();
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; ok && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      ok = (cc & 0xC0) == 0x80;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0x110000u + c);  // outside the Unicode range, so never equal to a real code point
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::size_t edit_distance(const std::u32string& a, const std::u32string& b) {
  if (a.size() < b.size()) return edit_distance(b, a);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string join_lines(const ProblemInstance& p, int first, int last) {
  std::string out;
  for (int i = first; i <= last; ++i) {
    if (i > first) out.push_back('\n');
    out += p.sentences[static_cast<std::size_t>(i - 1)].text;
  }
  return out;
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) { return edit_distance(code_points(a), code_points(b)); }

double fuzzy_ratio(std::string_view a, std::string_view b) {
  const auto x = code_points(normalize_whitespace(a));
  const auto y = code_points(normalize_whitespace(b));
  const auto longest = std::max(x.size(), y.size());
  if (longest == 0) return 100.0;
  return 100.0 * (1.0 - static_cast<double>(edit_distance(x, y)) / static_cast<double>(longest));
}

int prefix_length(int n_sentences, double split_fraction) {
  const int k = static_cast<int>(std::ceil(split_fraction * n_sentences));
  return std::clamp(k, 1, n_sentences - 1);
}

MemorizationResult probe(const ProblemInstance& p, ChatBackend& backend, double split_fraction) {
  if (p.size() < 2) {
    throw Error(Errc::PreconditionFailed, "problem '" + p.id + "' needs at least two sentences to probe");
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw Error(Errc::PreconditionFailed, "split fraction must lie in (0, 1)");
  }
  MemorizationResult r;
  r.problem_id = p.id;
  r.prefix_len_sentences = prefix_length(p.size(), split_fraction);
  r.continuation = join_lines(p, r.prefix_len_sentences + 1, p.size());

  ChatRequest req;
  req.model_id = backend.model_id();
  req.messages = {{"user", join_lines(p, 1, r.prefix_len_sentences) + "\n"}};
  req.temperature = 0.0;
  req.max_tokens = static_cast<int>(std::max<std::int64_t>(1, (estimate_tokens(r.continuation) * 5 + 3) / 4));
  r.generated = backend.complete(req).text;

  r.exact = normalize_whitespace(r.generated) == normalize_whitespace(r.continuation);
  r.fuzzy_score = r.exact ? 100.0 : fuzzy_ratio(r.generated, r.continuation);
  return r;
}

std::vector<MemorizationResult> probe_all(const std::vector<ProblemInstance>& problems, ChatBackend& backend,
                                          double split_fraction, int workers) {
  std::vector<MemorizationResult> out(problems.size());
  parallel_for(problems.size(), workers, [&](std::size_t i) { out[i] = probe(problems[i], backend, split_fraction); });
  return out;
}

MemorizationSummary aggregate_memorization(const std::vector<MemorizationResult>& results) {
  if (results.empty()) throw Error(Errc::EmptyInput, "no memorization results to aggregate");
  std::vector<double> fuzzy;
  std::size_t exact = 0;
  for (const auto& r : results) {
    fuzzy.push_back(r.fuzzy_score);
    if (r.exact) ++exact;
  }
  const auto ms = mean_std(fuzzy);
  return {100.0 * static_cast<double>(exact) / static_cast<double>(results.size()), ms.mean, ms.std, results.size()};
}

const std::vector<PublishedMemorization>& published_memorization() {
  static const std::vector<PublishedMemorization> rows{
      {Benchmark::ToMi, 52, 89, 15},     {Benchmark::FANToM, 35, 74, 24},   {Benchmark::MindGames, 2, 64, 18},
      {Benchmark::AdvCSFB, 0, 51, 11},   {Benchmark::SocialIQa, 0, 40, 12},
  };
  return rows;
}

void to_json(Json& j, const MemorizationResult& r) {
  j = Json{{"problem_id", r.problem_id},   {"prefix_len_sentences", r.prefix_len_sentences},
           {"exact", r.exact},             {"fuzzy_score", r.fuzzy_score},
           {"continuation", r.continuation}, {"generated", r.generated}};
}

void to_json(Json& j, const MemorizationSummary& s) {
  j = Json{{"exact_pct", s.exact_pct}, {"fuzzy_mean", s.fuzzy_mean}, {"fuzzy_std", s.fuzzy_std}, {"n", s.n}};
}

namespace {

const PublishedMemorization* find_published(Benchmark b) {
  for (const auto& row : published_memorization()) {
    if (row.benchmark == b) return &row;
  }
  return nullptr;
}

}  // namespace

Json memorization_report(const std::map<Benchmark, std::vector<MemorizationResult>>& results, double split_fraction) {
  Json benchmarks = Json::array();
  for (const auto& [b, rows] : results) {
    Json entry{{"benchmark", to_string(b)}, {"measured", aggregate_memorization(rows)}, {"items", rows}};
    if (const auto* pub = find_published(b)) {
      entry["published"] = Json{{"exact_pct", pub->exact_pct}, {"fuzzy_mean", pub->fuzzy_mean}, {"fuzzy_std", pub->fuzzy_std}};
    } else {
      entry["published"] = nullptr;
    }
    benchmarks.push_back(std::move(entry));
  }
  return Json{{"split_fraction", split_fraction},
              {"fuzzy_formula", "100 * (1 - levenshtein(a, b) / max(|a|, |b|)) over code points, whitespace collapsed"},
              {"exact_rule", "equality after whitespace collapsing; case kept"},
              {"benchmarks", std::move(benchmarks)}};
}

std::string render_memorization_table(const std::map<Benchmark, std::vector<MemorizationResult>>& results) {
  std::ostringstream out;
  out << "benchmark   n     exact    fuzzy          | published exact  published fuzzy\n";
  for (const auto& [b, rows] : results) {
    const auto m = aggregate_memorization(rows);
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %4zu  %6s%%  %6s±%-6s |", std::string(to_string(b)).c_str(), m.n,
                  fmt(m.exact_pct, 1).c_str(), fmt(m.fuzzy_mean, 1).c_str(), fmt(m.fuzzy_std, 1).c_str());
    out << line;
    if (const auto* pub = find_published(b)) {
      std::snprintf(line, sizeof line, " %14s%%  %12s±%s\n", fmt(pub->exact_pct, 0).c_str(), fmt(pub->fuzzy_mean, 0).c_str(),
                    fmt(pub->fuzzy_std, 0).c_str());
      out << line;
    } else {
      out << "              -                -\n";
    }
  }
  return out.str();
}

}  // namespace tomloom
