#include "tomloom/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

#include "tomloom/ingest.hpp"
#include "tomloom/parallel.hpp"

namespace fs = std::filesystem;

namespace tomloom {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string safe_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out[0] == '.') out.insert(out.begin(), '_');
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<ProblemInstance> selected_problems(const RunConfig& cfg) {
  if (cfg.sample_n) return sample(cfg.problems, *cfg.sample_n, cfg.sample_seed);
  return cfg.problems;
}

std::string hash_of(const std::vector<StrategyConfig>& strategies, const std::vector<ProblemInstance>& problems,
                    const std::string& model_id) {
  Json s = Json::array();
  for (const auto& c : strategies) {
    s.push_back(Json{{"key", c.key()},
                     {"temperature", c.temperature},
                     {"fuse_final", c.fuse_final},
                     {"max_tokens", c.max_tokens},
                     {"tot_experts", c.tot_experts},
                     {"seed", c.seed ? Json(*c.seed) : Json(nullptr)},
                     {"model_id", c.model_id}});
  }
  Json p = Json::array();
  for (const auto& problem : problems) p.push_back(problem);
  return sha256_hex(Json{{"model_id", model_id}, {"strategies", s}, {"problems", sha256_hex(p.dump())}}.dump());
}

void write_accuracy_figure(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "benchmark,strategy,splits,accuracy,error_rate,n\n";
  for (const auto& r : rows) {
    out << to_string(r.benchmark) << ',' << r.strategy << ',' << (r.splits ? std::to_string(r.splits) : "") << ','
        << num(r.accuracy) << ',' << num(1.0 - r.accuracy) << ',' << r.n << '\n';
  }
  write_file_atomic(path.string(), out.str());
}

}  // namespace

// --- scoring ----------------------------------------------------------------

std::optional<std::size_t> match_choice(std::string_view answer, const std::vector<std::string>& choices) {
  std::string a = normalize_answer(answer);
  while (!a.empty() && (a.front() == '(' || a.front() == '[')) a.erase(a.begin());
  while (!a.empty() && (a.back() == ')' || a.back() == ']' || a.back() == '.')) a.pop_back();
  if (a.empty()) return std::nullopt;

  if (a.size() == 1 && a[0] >= 'a' && a[0] <= 'z') {
    const auto idx = static_cast<std::size_t>(a[0] - 'a');
    if (idx < choices.size()) return idx;
    return std::nullopt;
  }

  std::vector<std::string> norm;
  for (const auto& c : choices) norm.push_back(normalize_answer(c));

  std::optional<std::size_t> equal;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    if (norm[i] != a) continue;
    if (equal) return std::nullopt;
    equal = i;
  }
  if (equal) return equal;

  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    if (norm[i].empty()) continue;
    if (a.find(norm[i]) != std::string::npos || norm[i].find(a) != std::string::npos) hits.push_back(i);
  }
  // A hit that is a substring of another hit ("entailment" inside "not_entailment") is dropped.
  std::vector<std::size_t> maximal;
  for (auto i : hits) {
    const bool inside = std::any_of(hits.begin(), hits.end(), [&](std::size_t j) {
      return j != i && norm[j] != norm[i] && norm[j].find(norm[i]) != std::string::npos;
    });
    if (!inside) maximal.push_back(i);
  }
  if (maximal.size() == 1) return maximal.front();
  return std::nullopt;
}

bool omega(const ExtractedAnswer& answer, const ProblemInstance& p) {
  if (!p.multiple_choice()) {
    const auto a = normalize_answer(answer.answer);
    return !a.empty() && a == normalize_answer(p.gold_answer);
  }
  const auto idx = match_choice(answer.answer, *p.choices);
  return idx && normalize_answer((*p.choices)[*idx]) == normalize_answer(p.gold_answer);
}

// --- runs -------------------------------------------------------------------

std::string config_hash(const RunConfig& cfg, const std::string& model_id) {
  return hash_of(cfg.strategies, selected_problems(cfg), model_id);
}

void to_json(Json& j, const PairResult& r) {
  j = Json{{"problem_id", r.problem_id},
           {"benchmark", to_string(r.benchmark)},
           {"strategy", r.strategy},
           {"splits", r.splits},
           {"answer", r.answer},
           {"correct", r.correct},
           {"error", r.error ? Json(*r.error) : Json(nullptr)},
           {"usage", {{"input_tokens", r.usage.input_tokens}, {"output_tokens", r.usage.output_tokens}}},
           {"transcript", r.transcript_ref}};
}

void from_json(const Json& j, PairResult& r) {
  r.problem_id = j.at("problem_id").get<std::string>();
  r.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
  r.strategy = j.at("strategy").get<std::string>();
  r.splits = j.value("splits", 0);
  r.answer = j.at("answer").get<std::string>();
  r.correct = j.at("correct").get<bool>();
  r.error.reset();
  if (const auto it = j.find("error"); it != j.end() && it->is_string()) r.error = it->get<std::string>();
  const auto& u = j.at("usage");
  r.usage.input_tokens = u.at("input_tokens").get<std::int64_t>();
  r.usage.output_tokens = u.at("output_tokens").get<std::int64_t>();
  r.transcript_ref = j.value("transcript", std::string{});
}

ResultSet run_experiment(const RunConfig& cfg, ChatBackend& backend) {
  if (cfg.problems.empty()) throw Error(Errc::InvalidArgument, "the dataset has no problems");
  if (cfg.strategies.empty()) throw Error(Errc::InvalidArgument, "no strategies selected");
  if (cfg.workers < 1) throw Error(Errc::InvalidArgument, "workers must be >= 1");
  if (cfg.output_dir.empty()) throw Error(Errc::InvalidArgument, "no output directory");
  for (const auto& s : cfg.strategies) validate(s);
  const auto problems = selected_problems(cfg);

  ResultSet rs;
  rs.provenance.model_id = backend.model_id();
  rs.provenance.backend = cfg.backend_ref;
  rs.provenance.config_hash = hash_of(cfg.strategies, problems, rs.provenance.model_id);

  const fs::path out_dir(cfg.output_dir);
  const std::string run_id = rs.provenance.config_hash.substr(0, 16);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create '" + out_dir.string() + "': " + ec.message());

  struct Slot {
    const ProblemInstance* problem;
    const StrategyConfig* strategy;
    std::string ref;  // relative pair file
    PairResult result;
    bool done = false;
  };
  std::vector<Slot> slots;
  for (const auto& s : cfg.strategies) {
    for (const auto& p : problems) {
      const auto ref = (fs::path("pairs") / run_id / safe_name(s.key()) / (safe_name(p.id) + ".json")).generic_string();
      slots.push_back({&p, &s, ref, {}, false});
    }
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto path = out_dir / slots[i].ref;
    if (!fs::exists(path)) {
      pending.push_back(i);
      continue;
    }
    try {
      slots[i].result = Json::parse(read_file(path.string())).at("result").get<PairResult>();
      slots[i].done = true;
      ++rs.resumed;
    } catch (const std::exception&) {
      pending.push_back(i);  // damaged pair file: evaluate again
    }
  }

  std::atomic<std::size_t> claimed{0};
  std::atomic<bool> stopped{false};
  parallel_for(pending.size(), cfg.workers, [&](std::size_t k) {
    if ((cfg.cancel && cfg.cancel->load()) || (cfg.stop_after && claimed++ >= *cfg.stop_after)) {
      stopped = true;
      return;
    }
    auto& slot = slots[pending[k]];
    const auto& p = *slot.problem;
    const auto& s = *slot.strategy;
    PairResult& r = slot.result;
    r.problem_id = p.id;
    r.benchmark = p.benchmark;
    r.strategy = s.key();
    r.splits = s.strategy == Strategy::DWM ? s.splits : 0;
    try {
      auto res = run_strategy(p, s, backend);
      r.answer = res.answer.answer;
      r.correct = omega(res.answer, p);
      r.usage = res.transcript.usage;
      r.transcript_ref = slot.ref;
      Json record{{"result", r}, {"transcript", res.transcript}};
      const auto path = out_dir / slot.ref;
      fs::create_directories(path.parent_path());
      write_file_atomic(path.string(), record.dump(1));
    } catch (const StrategyError& e) {
      r.error = e.what();
      r.usage = e.partial().usage;
      const auto ref = (fs::path("errors") / run_id / safe_name(s.key()) / (safe_name(p.id) + ".json")).generic_string();
      r.transcript_ref = ref;
      const auto path = out_dir / ref;
      fs::create_directories(path.parent_path());
      write_file_atomic(path.string(), Json{{"result", r}, {"transcript", e.partial()}}.dump(1));
    } catch (const Error& e) {
      r.error = e.what();
    }
    slot.done = true;
  });

  for (const auto& slot : slots) {
    if (slot.done) rs.rows.push_back(slot.result);
  }
  rs.complete = !stopped && rs.rows.size() == slots.size();
  rs.summary = summarize(rs.rows);
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_strategy;
  for (const auto& r : rs.rows) {
    auto& [correct, n] = per_strategy[r.strategy];
    n += 1;
    correct += r.correct ? 1 : 0;
  }
  for (const auto& [k, v] : per_strategy) rs.accuracy[k] = static_cast<double>(v.first) / static_cast<double>(v.second);
  if (!rs.complete) return rs;

  rs.provenance.timestamp = utc_now();
  std::string jsonl;
  for (const auto& r : rs.rows) jsonl += Json(r).dump() + "\n";
  write_file_atomic((out_dir / "results.jsonl").string(), jsonl);

  Json aggregates = Json::object();
  for (const auto& [k, v] : per_strategy) {
    aggregates[k] = Json{{"accuracy", rs.accuracy[k]}, {"correct", v.first}, {"n", v.second}};
  }
  Json provenance{{"model_id", rs.provenance.model_id},
                  {"backend", rs.provenance.backend},
                  {"config_hash", rs.provenance.config_hash},
                  {"timestamp", rs.provenance.timestamp},
                  {"results_sha256", sha256_hex(jsonl)}};
  write_file_atomic((out_dir / "resultset.json").string(),
                    Json{{"aggregates", aggregates}, {"provenance", provenance}, {"results", "results.jsonl"}}.dump(2) + "\n");

  std::ostringstream csv;
  write_summary_csv(csv, rs.summary);
  write_file_atomic((out_dir / "summary.csv").string(), csv.str());
  fs::create_directories(out_dir / "figure_data");
  write_accuracy_figure(out_dir / "figure_data" / "accuracy.csv", rs.summary);
  return rs;
}

std::vector<SummaryRow> summarize(const std::vector<PairResult>& rows) {
  std::map<std::pair<Benchmark, std::string>, SummaryRow> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.benchmark, r.strategy}];
    g.benchmark = r.benchmark;
    g.strategy = r.strategy;
    g.splits = r.splits;
    g.n += 1;
    g.correct += r.correct ? 1 : 0;
    g.errors += r.error ? 1 : 0;
    g.input_tokens += r.usage.input_tokens;
    g.output_tokens += r.usage.output_tokens;
  }
  std::vector<SummaryRow> out;
  for (auto& [key, g] : groups) {
    g.accuracy = static_cast<double>(g.correct) / static_cast<double>(g.n);
    out.push_back(g);
  }
  return out;
}

std::vector<PairResult> load_results(const std::string& results_jsonl) {
  std::vector<PairResult> out;
  std::istringstream in(read_file(results_jsonl));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line).get<PairResult>());
    } catch (const Json::exception& e) {
      throw Error(Errc::ParseError, results_jsonl + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "benchmark,strategy,splits,accuracy,n,input_tokens,output_tokens\n";
  for (const auto& r : rows) {
    out << to_string(r.benchmark) << ',' << r.strategy << ',' << (r.splits ? std::to_string(r.splits) : "") << ','
        << num(r.accuracy) << ',' << r.n << ',' << r.input_tokens << ',' << r.output_tokens << '\n';
  }
}

// --- published --------------------------------------------------------------

const std::vector<PublishedAccuracy>& published_accuracy() {
  static const std::vector<PublishedAccuracy> rows{
      {Benchmark::ToMi, 0.625, 0.629},     {Benchmark::FANToM, 0.579, 0.403},    {Benchmark::MindGames, 0.618, 0.552},
      {Benchmark::AdvCSFB, 0.8364, 0.7091}, {Benchmark::SocialIQa, 0.691, 0.736},
  };
  return rows;
}

const std::vector<PublishedStateStats>& published_state_stats() {
  static const std::vector<PublishedStateStats> rows{
      {Benchmark::ToMi, 2.62, 1.68, 4.27, 2.1, 3},        {Benchmark::FANToM, 2.44, 0.96, 59.42, 18.91, 3},
      {Benchmark::MindGames, 1.22, 0.90, 5.24, 2.71, 1},  {Benchmark::AdvCSFB, 3.24, 1.35, 2.86, 1.34, 4},
      {Benchmark::SocialIQa, 1.0, 0.0, 1.14, 0.447, 1},
  };
  return rows;
}

std::string render_accuracy_report(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "benchmark   strategy  n      accuracy  errors  published\n";
  for (const auto& r : rows) {
    std::string published = "-";
    for (const auto& p : published_accuracy()) {
      if (p.benchmark != r.benchmark) continue;
      published = "dwm " + fixed(p.dwm, 4) + ", cot " + fixed(p.cot, 4);
    }
    char line[200];
    std::snprintf(line, sizeof line, "%-10s  %-8s  %-5zu  %-8s  %-6zu  %s\n", std::string(to_string(r.benchmark)).c_str(),
                  r.strategy.c_str(), r.n, fixed(r.accuracy, 4).c_str(), r.errors, published.c_str());
    out << line;
  }
  return out.str();
}

// --- correlation --------------------------------------------------------------

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(Errc::PreconditionFailed, "correlation needs two equally long series of at least 2 values");
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::DegenerateInput, "correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = rank;
    i = j + 1;
  }
  return out;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(Errc::PreconditionFailed, "correlation needs two equally long series of at least 2 values");
  }
  return pearson(ranks(xs), ranks(ys));
}

CorrelationReport correlate_complexity_error(const std::vector<PairResult>& rows,
                                             const std::vector<ProblemInstance>& problems,
                                             const std::vector<AnnotationSet>& annotations, const std::string& strategy,
                                             double tau, CorrelationStat stat, bool per_instance) {
  std::map<std::string, Benchmark> benchmark_of;
  for (const auto& p : problems) benchmark_of[p.id] = p.benchmark;
  std::map<std::string, const PairResult*> row_of;
  for (const auto& r : rows) {
    if (r.strategy == strategy) row_of[r.problem_id] = &r;
  }

  CorrelationReport report;
  report.stat = stat;
  if (per_instance) {
    for (const auto& a : annotations) {
      const auto it = row_of.find(a.problem_id);
      if (it == row_of.end()) continue;
      report.points.push_back({a.problem_id, complexity(a, tau).complexity, it->second->correct ? 0.0 : 1.0});
    }
  } else {
    std::map<Benchmark, std::vector<double>> cx;
    for (const auto& a : annotations) {
      const auto it = benchmark_of.find(a.problem_id);
      if (it != benchmark_of.end()) cx[it->second].push_back(complexity(a, tau).complexity);
    }
    std::map<Benchmark, std::pair<std::size_t, std::size_t>> acc;  // correct, n
    for (const auto& r : rows) {
      if (r.strategy != strategy) continue;
      auto& [c, n] = acc[r.benchmark];
      c += r.correct ? 1 : 0;
      n += 1;
    }
    for (const auto& [b, values] : cx) {
      const auto it = acc.find(b);
      if (it == acc.end()) continue;
      const double accuracy = static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
      report.points.push_back({std::string(to_string(b)), mean_std(values).mean, 1.0 - accuracy});
    }
  }
  std::vector<double> xs, ys;
  for (const auto& p : report.points) {
    xs.push_back(p.complexity);
    ys.push_back(p.error_rate);
  }
  report.coefficient = stat == CorrelationStat::Pearson ? pearson(xs, ys) : spearman(xs, ys);
  return report;
}

void write_correlation_csv(std::ostream& out, const CorrelationReport& report) {
  out << "label,complexity,error_rate\n";
  for (const auto& p : report.points) out << p.label << ',' << num(p.complexity) << ',' << num(p.error_rate) << '\n';
}

// --- best split -------------------------------------------------------------

std::vector<BestSplitRow> best_split_report(const std::map<Benchmark, std::map<int, double>>& accuracy_by_split,
                                            const std::vector<BenchmarkStats>& stats, bool strict) {
  if (accuracy_by_split.empty()) throw Error(Errc::MissingSplits, "no DWM results");
  std::vector<BestSplitRow> out;
  for (const auto& [b, by_split] : accuracy_by_split) {
    if (by_split.empty()) throw Error(Errc::MissingSplits, "no DWM results for " + std::string(to_string(b)));
    if (strict) {
      for (int s = 1; s <= 5; ++s) {
        if (!by_split.count(s)) {
          throw Error(Errc::MissingSplits, std::string(to_string(b)) + " has no result for " + std::to_string(s) + " splits");
        }
      }
    }
    BestSplitRow row;
    row.benchmark = b;
    bool first = true;
    for (const auto& [split, acc] : by_split) {  // ascending split: strict '>' keeps the smaller on ties
      if (first || acc > row.accuracy) {
        row.best_split = split;
        row.accuracy = acc;
        first = false;
      }
    }
    for (const auto& s : stats) {
      if (s.benchmark == b) row.statefulness_mean = s.statefulness_mean;
    }
    for (const auto& p : published_state_stats()) {
      if (p.benchmark == b) row.published_best_split = p.best_split;
    }
    out.push_back(row);
  }
  return out;
}

std::map<Benchmark, std::map<int, double>> dwm_accuracy_by_split(const std::vector<SummaryRow>& rows) {
  std::map<Benchmark, std::map<int, double>> out;
  for (const auto& r : rows) {
    if (r.splits > 0 && r.strategy.rfind("dwm", 0) == 0) out[r.benchmark][r.splits] = r.accuracy;
  }
  return out;
}

std::string render_best_split_table(const std::vector<BestSplitRow>& rows) {
  std::ostringstream out;
  out << "benchmark   best split  accuracy  statefulness  published best split\n";
  for (const auto& r : rows) {
    char line[200];
    std::snprintf(line, sizeof line, "%-10s  %-10d  %-8s  %-12s  %s\n", std::string(to_string(r.benchmark)).c_str(),
                  r.best_split, fixed(r.accuracy, 4).c_str(),
                  r.statefulness_mean ? fixed(*r.statefulness_mean, 2).c_str() : "-",
                  r.published_best_split ? std::to_string(*r.published_best_split).c_str() : "-");
    out << line;
  }
  return out.str();
}

}  // namespace tomloom
