#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "tomloom/complexity.hpp"
#include "tomloom/gateway.hpp"
#include "tomloom/harness.hpp"
#include "tomloom/ingest.hpp"
#include "tomloom/memorization.hpp"
#include "tomloom/service.hpp"
#include "tomloom/strategies.hpp"
#include "tomloom/world.hpp"

namespace fs = std::filesystem;

namespace tomloom::cli {

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_interrupt(int) { g_interrupted = true; }

struct InterruptGuard {
  using Handler = void (*)(int);
  Handler previous;
  InterruptGuard() : previous(std::signal(SIGINT, on_interrupt)) { g_interrupted = false; }
  ~InterruptGuard() { std::signal(SIGINT, previous); }
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// `key = value` lines; '#' starts a comment, [section] headers prefix keys as "section.key".
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos && line.find('"') > hash) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigError, path + " line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

class Settings {
 public:
  void load(const std::string& explicit_path) {
    if (!explicit_path.empty()) {
      file_ = read_config_file(explicit_path);
    } else if (fs::exists("tomloom.toml")) {
      file_ = read_config_file("tomloom.toml");
    }
  }

  /// flag > environment > config file > fallback
  std::string get(const std::string& flag, std::string_view env, const std::string& key,
                  const std::string& fallback = {}) const {
    if (!flag.empty()) return flag;
    if (!env.empty()) {
      if (const char* v = std::getenv(std::string(env).c_str()); v && *v) return v;
    }
    if (const auto it = file_.find(key); it != file_.end()) return it->second;
    return fallback;
  }

 private:
  std::map<std::string, std::string> file_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<int> parse_splits(const std::string& s) {
  std::vector<int> out;
  for (const auto& part : split_list(s)) {
    try {
      if (const auto dash = part.find('-'); dash != std::string::npos) {
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = std::stoi(part.substr(dash + 1));
        for (int i = lo; i <= hi; ++i) out.push_back(i);
      } else {
        out.push_back(std::stoi(part));
      }
    } catch (const std::logic_error&) {
      throw Error(Errc::InvalidArgument, "bad --splits value '" + part + "'");
    }
  }
  if (out.empty()) throw Error(Errc::InvalidArgument, "--splits is empty");
  return out;
}

struct BackendOptions {
  std::string kind;  // mock | http
  std::string mock_script;
  std::string api_base;
  std::string model;
  std::string endpoint;
  std::string cache_dir;
  bool no_cache = false;
  int max_in_flight = 0;
  int timeout_s = 0;

  void add_to(CLI::App* app) {
    app->add_option("--backend", kind, "mock or http (default: config file, else http)");
    app->add_option("--mock-script", mock_script, "Rules file for the mock backend");
    app->add_option("--api-base", api_base, "OpenAI-compatible base URL (env TOMLOOM_API_BASE)");
    app->add_option("--model", model, "Model id (env TOMLOOM_MODEL)");
    app->add_option("--endpoint", endpoint, "chat or completions");
    app->add_option("--cache-dir", cache_dir, "Response cache directory (default ~/.tomloom/cache for http)");
    app->add_flag("--no-cache", no_cache, "Disable the response cache");
    app->add_option("--max-in-flight", max_in_flight, "Concurrent request limit (default: workers)");
    app->add_option("--timeout", timeout_s, "Per-request timeout in seconds");
  }
};

struct BuiltBackend {
  std::shared_ptr<ChatBackend> backend;
  std::string ref;  // provenance label without secrets
};

BuiltBackend build_backend(const BackendOptions& o, const Settings& settings, int workers,
                           HttpBackendConfig::Endpoint default_endpoint) {
  const auto kind = settings.get(o.kind, "", "backend", "http");
  std::shared_ptr<ChatBackend> backend;
  std::string ref;
  bool cache_by_default = false;
  if (kind == "mock") {
    const auto script = settings.get(o.mock_script, "", "mock_script");
    if (script.empty()) throw Error(Errc::ConfigError, "the mock backend needs --mock-script");
    backend = std::make_shared<MockBackend>(MockScript::load(script), settings.get(o.model, "", "model", "mock"));
    ref = "mock:" + fs::path(script).filename().string();
  } else if (kind == "http") {
    HttpBackendConfig c;
    c.api_base = settings.get(o.api_base, kEnvApiBase, "api_base");
    c.api_key = settings.get("", kEnvApiKey, "api_key");
    c.model = settings.get(o.model, kEnvModel, "model");
    const auto endpoint = settings.get(o.endpoint, "", "endpoint");
    if (endpoint.empty()) {
      c.endpoint = default_endpoint;
    } else if (endpoint == "chat") {
      c.endpoint = HttpBackendConfig::Endpoint::Chat;
    } else if (endpoint == "completions") {
      c.endpoint = HttpBackendConfig::Endpoint::Completions;
    } else {
      throw Error(Errc::ConfigError, "--endpoint must be chat or completions");
    }
    if (const auto t = o.timeout_s > 0 ? std::to_string(o.timeout_s) : settings.get("", "", "timeout"); !t.empty()) {
      c.timeout = std::chrono::seconds(std::stoi(t));
    }
    backend = std::make_shared<HttpBackend>(c);
    ref = "http:" + c.api_base;
    cache_by_default = true;
  } else {
    throw Error(Errc::ConfigError, "unknown backend '" + kind + "' (mock or http)");
  }

  const int in_flight = o.max_in_flight > 0 ? o.max_in_flight : std::max(1, workers);
  backend = std::make_shared<LimitedBackend>(backend, in_flight);
  const auto cache_dir = settings.get(o.cache_dir, "", "cache_dir");
  if (!o.no_cache && (cache_by_default || !cache_dir.empty())) {
    auto cache = std::make_shared<ResponseCache>(cache_dir.empty() ? default_cache_dir() : fs::path(cache_dir));
    backend = std::make_shared<CachingBackend>(backend, cache);
  }
  return {backend, ref};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path.string(), text);
}

std::string problems_to_jsonl(const std::vector<ProblemInstance>& problems) {
  std::string out;
  for (const auto& p : problems) out += to_canonical(p) + "\n";
  return out;
}

// --- subcommands --------------------------------------------------------------

struct Globals {
  std::string config_path;
  bool json = false;
};

int cmd_ingest(const std::string& benchmark, const std::string& in, const std::string& out_path, const Globals& g,
               std::ostream& out) {
  const auto report = ingest(parse_benchmark(benchmark), in, out_path);
  if (g.json) {
    out << Json{{"count", report.count}, {"passthrough", report.passthrough}, {"output", out_path}}.dump() << "\n";
  } else {
    out << "wrote " << report.count << " problems to " << out_path;
    if (report.passthrough) out << " (" << report.passthrough << " already normalized)";
    out << "\n";
  }
  return kExitOk;
}

struct WorldgenOptions {
  int count = 10;
  std::uint64_t seed = 0;
  world::WorldParams params;
  std::string out = "synthetic.jsonl";
  std::string annotations = "synthetic.tomann.json";
  std::string gold = "synthetic.gold.jsonl";
};

int cmd_worldgen(const WorldgenOptions& o, const Globals& g, std::ostream& out) {
  if (o.count < 1) throw Error(Errc::InvalidArgument, "--count must be >= 1");
  std::vector<ProblemInstance> problems;
  std::vector<AnnotationSet> annotations;
  std::string gold;
  for (int i = 0; i < o.count; ++i) {
    auto story = world::generate(o.seed + static_cast<std::uint64_t>(i), o.params);
    annotations.push_back(world::derive_annotation(story.trace));
    gold += Json{{"problem_id", story.problem.id},
                 {"question_object_id", story.trace.question.object_id()},
                 {"gold_answer", story.problem.gold_answer}}
                .dump() +
            "\n";
    problems.push_back(std::move(story.problem));
  }
  write_text(o.out, problems_to_jsonl(problems));
  write_text(o.annotations, annotation_bundle(annotations) + "\n");
  write_text(o.gold, gold);
  if (g.json) {
    out << Json{{"count", problems.size()}, {"problems", o.out}, {"annotations", o.annotations}, {"gold", o.gold}}.dump()
        << "\n";
  } else {
    out << "wrote " << problems.size() << " stories to " << o.out << ", annotations to " << o.annotations
        << " and gold answers to " << o.gold << "\n";
  }
  return kExitOk;
}

struct RunOptions {
  std::string data;
  std::string strategies = "dwm";
  std::string splits = "1";
  int tot_experts = 3;
  double temperature = -1.0;
  bool fuse_final = false;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed_request;
  std::optional<std::size_t> sample;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out = "results";
  BackendOptions backend;
};

int cmd_run(const RunOptions& o, const Settings& settings, const Globals& g, std::ostream& out, std::ostream& err) {
  if (o.workers < 1) throw Error(Errc::InvalidArgument, "--workers must be >= 1");
  RunConfig cfg;
  for (const auto& name : split_list(o.strategies)) {
    const auto s = parse_strategy(name);
    std::vector<StrategyConfig> made;
    if (s == Strategy::DWM) {
      for (int k : parse_splits(o.splits)) made.push_back(StrategyConfig::dwm(k));
    } else if (s == Strategy::ToT) {
      made.push_back(StrategyConfig::tot(o.tot_experts));
    } else if (s == Strategy::CoT) {
      made.push_back(StrategyConfig::cot());
    } else {
      made.push_back(StrategyConfig::structured(s));
    }
    for (auto& c : made) {
      if (o.temperature >= 0.0) c.temperature = o.temperature;
      c.fuse_final = o.fuse_final;
      c.max_tokens = o.max_tokens;
      c.seed = o.seed_request;
      validate(c);
      cfg.strategies.push_back(c);
    }
  }
  if (cfg.strategies.empty()) throw Error(Errc::InvalidArgument, "--strategy is empty");
  cfg.problems = load_problems(o.data);
  if (o.sample && *o.sample > cfg.problems.size()) {
    throw Error(Errc::SampleTooLarge, "--sample " + std::to_string(*o.sample) + " exceeds the " +
                                          std::to_string(cfg.problems.size()) + " problems in " + o.data);
  }
  cfg.sample_n = o.sample;
  cfg.sample_seed = o.seed;
  cfg.workers = o.workers;
  cfg.output_dir = o.out;

  const auto built = build_backend(o.backend, settings, o.workers, HttpBackendConfig::Endpoint::Chat);
  cfg.backend_ref = built.ref;
  InterruptGuard guard;
  cfg.cancel = &g_interrupted;
  const auto rs = run_experiment(cfg, *built.backend);
  if (!rs.complete) {
    err << "interrupted: " << rs.rows.size() << " pairs saved under " << o.out << "; rerun the same command to resume\n";
    return kExitUser;
  }
  if (g.json) {
    Json rows = Json::array();
    for (const auto& r : rs.summary) {
      rows.push_back(Json{{"benchmark", to_string(r.benchmark)}, {"strategy", r.strategy}, {"accuracy", r.accuracy},
                          {"n", r.n}, {"errors", r.errors}});
    }
    out << Json{{"summary", rows}, {"resumed", rs.resumed}, {"config_hash", rs.provenance.config_hash},
                {"output", o.out}}.dump()
        << "\n";
  } else {
    out << render_accuracy_report(rs.summary);
    out << "results in " << o.out << " (" << rs.resumed << " pairs resumed)\n";
  }
  return kExitOk;
}

struct MemorizeOptions {
  std::string data;
  double split_fraction = kDefaultSplitFraction;
  std::optional<std::size_t> sample;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out = "memorization_report.json";
  BackendOptions backend;
};

int cmd_memorize(const MemorizeOptions& o, const Settings& settings, const Globals& g, std::ostream& out) {
  if (!(o.split_fraction > 0.0 && o.split_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "--split-fraction must lie in (0, 1)");
  }
  auto problems = load_problems(o.data);
  if (o.sample) problems = sample(problems, *o.sample, o.seed);
  const auto built = build_backend(o.backend, settings, o.workers, HttpBackendConfig::Endpoint::Completions);
  const auto results = probe_all(problems, *built.backend, o.split_fraction, o.workers);
  std::map<Benchmark, std::vector<MemorizationResult>> grouped;
  for (std::size_t i = 0; i < problems.size(); ++i) grouped[problems[i].benchmark].push_back(results[i]);
  auto report = memorization_report(grouped, o.split_fraction);
  report["backend"] = built.ref;
  report["model_id"] = built.backend->model_id();
  write_text(o.out, report.dump(2) + "\n");
  if (g.json) {
    Json rows = Json::array();
    for (const auto& b : report["benchmarks"]) rows.push_back(Json{{"benchmark", b["benchmark"]}, {"measured", b["measured"]}, {"published", b["published"]}});
    out << Json{{"benchmarks", rows}, {"output", o.out}}.dump() << "\n";
  } else {
    out << render_memorization_table(grouped) << "report written to " << o.out << "\n";
  }
  return kExitOk;
}

struct ComplexityOptions {
  std::string annotations;
  std::string data;
  double tau = kDefaultTau;
  bool tau_sweep = false;
  std::string out;
  std::string stats_out;
};

int cmd_complexity(const ComplexityOptions& o, const Globals& g, std::ostream& out, std::ostream& err) {
  if (!(o.tau >= 0.0 && o.tau <= 1.0)) {
    throw Error(Errc::TauOutOfRange, "tau must lie in [0, 1], got " + std::to_string(o.tau));
  }
  const auto annotations = load_annotations(o.annotations);
  std::map<std::string, const ProblemInstance*> by_id;
  std::vector<ProblemInstance> problems;
  if (!o.data.empty()) {
    problems = load_problems(o.data);
    for (const auto& p : problems) by_id[p.id] = &p;
    bool bad = false;
    for (const auto& a : annotations) {
      const auto it = by_id.find(a.problem_id);
      if (it == by_id.end()) {
        err << a.problem_id << ": no such problem in " << o.data << "\n";
        bad = true;
        continue;
      }
      for (const auto& v : validate_annotation(a, *it->second)) {
        err << a.problem_id << ": " << to_string(v.kind) << " " << v.object_id << " " << v.detail << "\n";
        bad = true;
      }
    }
    if (bad) throw Error(Errc::InvalidArgument, "annotations do not validate against " + o.data);
  }

  const std::vector<double> taus = o.tau_sweep ? tau_sweep() : std::vector<double>{o.tau};
  Json all = Json::array();
  std::string text;
  for (double tau : taus) {
    std::map<Benchmark, std::vector<ComplexityReport>> groups;
    for (const auto& a : annotations) {
      auto r = complexity(a, tau);
      all.push_back(r);
      char line[256];
      std::snprintf(line, sizeof line, "%-24s tau=%.3f  statefulness=%d  statelessness=%d  complexity=%.4f\n",
                    r.problem_id.c_str(), tau, r.statefulness, r.statelessness_raw, r.complexity);
      text += line;
      const auto it = by_id.find(a.problem_id);
      groups[it == by_id.end() ? Benchmark::Other : it->second->benchmark].push_back(std::move(r));
    }
    if (!o.stats_out.empty() && tau == taus.front()) {
      std::ostringstream csv;
      write_benchmark_stats_csv(csv, aggregate_stats(groups));
      write_text(o.stats_out, csv.str());
    }
  }
  if (!o.out.empty()) {
    std::string jsonl;
    for (const auto& r : all) jsonl += r.dump() + "\n";
    write_text(o.out, jsonl);
  }
  if (g.json) {
    out << all.dump() << "\n";
  } else {
    out << text;
  }
  return kExitOk;
}

struct ServeOptions {
  std::string data;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store = "annotations";
  std::string static_dir;
};

int cmd_serve(const ServeOptions& o, std::ostream& out) {
  ServiceConfig cfg;
  cfg.host = o.host;
  cfg.port = o.port;
  cfg.store_dir = o.store;
  if (!o.static_dir.empty()) cfg.static_dir = o.static_dir;
  AnnotationService service(load_problems(o.data), cfg);
  InterruptGuard guard;
  service.start();
  out << "serving " << o.data << " on http://" << o.host << ":" << service.port() << " (Ctrl-C to stop)\n" << std::flush;
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  return kExitOk;
}

struct ReportOptions {
  std::string results_dir;
  std::string annotations;
  std::string data;
  std::string strategy;
  double tau = kDefaultTau;
  bool spearman = false;
  bool per_instance = false;
  bool strict_splits = false;
};

int cmd_report(const ReportOptions& o, const Globals& g, std::ostream& out) {
  const fs::path dir(o.results_dir);
  const auto rows = load_results((dir / "results.jsonl").string());
  const auto summary = summarize(rows);
  Json j{{"summary", Json::array()}};
  for (const auto& r : summary) {
    double published = -1.0;
    for (const auto& p : published_accuracy()) {
      if (p.benchmark != r.benchmark) continue;
      if (r.strategy.rfind("dwm", 0) == 0) published = p.dwm;
      if (r.strategy == "cot") published = p.cot;
    }
    j["summary"].push_back(Json{{"benchmark", to_string(r.benchmark)},
                                {"strategy", r.strategy},
                                {"accuracy", r.accuracy},
                                {"n", r.n},
                                {"published", published < 0 ? Json(nullptr) : Json(published)}});
  }
  std::string text = render_accuracy_report(summary);

  std::vector<BenchmarkStats> stats;
  std::vector<AnnotationSet> annotations;
  std::vector<ProblemInstance> problems;
  if (!o.annotations.empty()) {
    if (o.data.empty()) throw Error(Errc::InvalidArgument, "--annotations needs --data to map problems to benchmarks");
    annotations = load_annotations(o.annotations);
    problems = load_problems(o.data);
    std::map<std::string, Benchmark> bench;
    for (const auto& p : problems) bench[p.id] = p.benchmark;
    std::map<Benchmark, std::vector<ComplexityReport>> groups;
    for (const auto& a : annotations) {
      const auto it = bench.find(a.problem_id);
      if (it != bench.end()) groups[it->second].push_back(complexity(a, o.tau));
    }
    stats = aggregate_stats(groups);
  }

  const auto by_split = dwm_accuracy_by_split(summary);
  if (!by_split.empty()) {
    const auto best = best_split_report(by_split, stats, o.strict_splits);
    text += "\n" + render_best_split_table(best);
    for (const auto& b : best) {
      j["best_split"].push_back(Json{{"benchmark", to_string(b.benchmark)},
                                     {"best_split", b.best_split},
                                     {"accuracy", b.accuracy},
                                     {"published_best_split", b.published_best_split ? Json(*b.published_best_split) : Json(nullptr)}});
    }
  }

  if (!annotations.empty()) {
    std::string strategy = o.strategy;
    if (strategy.empty() && !summary.empty()) strategy = summary.front().strategy;
    const auto stat = o.spearman ? CorrelationStat::Spearman : CorrelationStat::Pearson;
    try {
      const auto corr = correlate_complexity_error(rows, problems, annotations, strategy, o.tau, stat, o.per_instance);
      std::ostringstream csv;
      write_correlation_csv(csv, corr);
      write_text(dir / "figure_data" / "complexity_vs_error.csv", csv.str());
      text += "\n" + std::string(o.spearman ? "spearman" : "pearson") + " correlation of complexity and error rate (" +
              strategy + ", " + std::to_string(corr.points.size()) + " points): " + std::to_string(corr.coefficient) + "\n";
      j["correlation"] = Json{{"strategy", strategy}, {"stat", o.spearman ? "spearman" : "pearson"},
                              {"coefficient", corr.coefficient}, {"points", corr.points.size()}};
    } catch (const Error& e) {
      if (e.code() != Errc::PreconditionFailed && e.code() != Errc::DegenerateInput) throw;
      text += "\ncorrelation skipped: " + std::string(e.what()) + "\n";
    }
  }
  write_text(dir / "report.txt", text);
  out << (g.json ? j.dump() + "\n" : text);
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Theory-of-Mind task complexity and prompting toolkit", "tomloom"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Key/value config file (default ./tomloom.toml)");
  app.add_flag("--json", g.json, "Machine-readable output");

  std::string ingest_benchmark, ingest_in, ingest_out;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert a native benchmark file to problems JSONL");
  ingest_cmd->add_option("--benchmark", ingest_benchmark, "tomi, socialiqa, mindgames, advcsfb or fantom")->required();
  ingest_cmd->add_option("--in", ingest_in, "Native input file")->required();
  ingest_cmd->add_option("--out", ingest_out, "Output JSONL")->required();

  WorldgenOptions wg;
  auto* worldgen_cmd = app.add_subcommand("worldgen", "Generate synthetic stories with exact annotations");
  worldgen_cmd->add_option("--count", wg.count, "Number of stories");
  worldgen_cmd->add_option("--seed", wg.seed, "Seed of the first story; story i uses seed + i");
  worldgen_cmd->add_option("--agents", wg.params.n_agents, "Agents per story");
  worldgen_cmd->add_option("--distractors", wg.params.n_distractors, "Distractor sentences per story");
  worldgen_cmd->add_option("--moves", wg.params.n_moves, "Object moves per story");
  worldgen_cmd->add_option("--k-max", wg.params.k_max, "Highest belief order tracked (0..2)");
  worldgen_cmd->add_flag("--exit-events", wg.params.exit_counts_as_event, "Mark beliefs stale on exit");
  worldgen_cmd->add_option("--out", wg.out, "Problems JSONL");
  worldgen_cmd->add_option("--annotations", wg.annotations, "Annotation bundle (.tomann.json)");
  worldgen_cmd->add_option("--gold", wg.gold, "Gold answers JSONL");

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Evaluate prompting strategies on a dataset");
  run_cmd->add_option("--data", run.data, "Problems JSONL")->required();
  run_cmd->add_option("--strategy", run.strategies, "Comma list of dwm, cot, tot, json, yaml");
  run_cmd->add_option("--splits", run.splits, "DWM splits, e.g. 3, 1,3,5 or 1-5");
  run_cmd->add_option("--tot-experts", run.tot_experts, "ToT voters");
  run_cmd->add_option("--temperature", run.temperature, "Sampling temperature (default per strategy)");
  run_cmd->add_flag("--fuse-final", run.fuse_final, "DWM: send the question with the last chunk");
  run_cmd->add_option("--max-tokens", run.max_tokens, "Completion budget per call");
  run_cmd->add_option("--request-seed", run.seed_request, "Seed forwarded to the backend");
  run_cmd->add_option("--sample", run.sample, "Evaluate a random sample of this size");
  run_cmd->add_option("--seed", run.seed, "Sampling seed");
  run_cmd->add_option("--workers", run.workers, "Parallel (problem, strategy) pairs");
  run_cmd->add_option("--out", run.out, "Output directory");
  run.backend.add_to(run_cmd);

  MemorizeOptions mem;
  auto* memorize_cmd = app.add_subcommand("memorize", "Probe a completion model for memorized items");
  memorize_cmd->add_option("--data", mem.data, "Problems JSONL")->required();
  memorize_cmd->add_option("--split-fraction", mem.split_fraction, "Share of sentences given as prefix");
  memorize_cmd->add_option("--sample", mem.sample, "Probe a random sample of this size");
  memorize_cmd->add_option("--seed", mem.seed, "Sampling seed");
  memorize_cmd->add_option("--workers", mem.workers, "Parallel probes");
  memorize_cmd->add_option("--out", mem.out, "Report path");
  mem.backend.add_to(memorize_cmd);

  ComplexityOptions cx;
  auto* complexity_cmd = app.add_subcommand("complexity", "Statefulness, statelessness and complexity of annotations");
  complexity_cmd->add_option("--tau", cx.tau, "Discount of other objects' events, in [0, 1]");
  complexity_cmd->add_flag("--tau-sweep", cx.tau_sweep, "Report tau = 0.05, 0.1, 0.15, 0.2");
  complexity_cmd->add_option("--annotations", cx.annotations, ".tomann.json file")->required();
  complexity_cmd->add_option("--data", cx.data, "Problems JSONL to validate against and group by benchmark");
  complexity_cmd->add_option("--out", cx.out, "Reports JSONL");
  complexity_cmd->add_option("--stats-out", cx.stats_out, "Per-benchmark statistics CSV");

  ServeOptions serve;
  auto* annotate_cmd = app.add_subcommand("annotate", "Annotation tooling");
  annotate_cmd->require_subcommand(1);
  auto* serve_cmd = annotate_cmd->add_subcommand("serve", "Serve the annotation REST API");
  serve_cmd->add_option("--data", serve.data, "Problems JSONL")->required();
  serve_cmd->add_option("--host", serve.host, "Listen address");
  serve_cmd->add_option("--port", serve.port, "Listen port (0 = any free port)");
  serve_cmd->add_option("--store", serve.store, "Annotation store directory");
  serve_cmd->add_option("--static", serve.static_dir, "Directory with the UI bundle");

  ReportOptions rep;
  auto* report_cmd = app.add_subcommand("report", "Summarize a results directory");
  report_cmd->add_option("--results", rep.results_dir, "Directory written by run")->required();
  report_cmd->add_option("--annotations", rep.annotations, "Annotations for complexity statistics and correlation");
  report_cmd->add_option("--data", rep.data, "Problems JSONL matching the annotations");
  report_cmd->add_option("--strategy", rep.strategy, "Strategy key for the correlation (e.g. dwm-3)");
  report_cmd->add_option("--tau", rep.tau, "Complexity discount");
  report_cmd->add_flag("--spearman", rep.spearman, "Rank correlation instead of Pearson");
  report_cmd->add_flag("--per-instance", rep.per_instance, "One correlation point per problem");
  report_cmd->add_flag("--strict-splits", rep.strict_splits, "Require DWM results for every split 1..5");

  // Global options are accepted after the subcommand as well.
  for (auto* sub : {ingest_cmd, worldgen_cmd, run_cmd, memorize_cmd, complexity_cmd, annotate_cmd, serve_cmd, report_cmd}) {
    sub->fallthrough();
  }

  std::vector<const char*> argv{"tomloom"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    Settings settings;
    settings.load(g.config_path);
    if (*ingest_cmd) return cmd_ingest(ingest_benchmark, ingest_in, ingest_out, g, out);
    if (*worldgen_cmd) return cmd_worldgen(wg, g, out);
    if (*run_cmd) return cmd_run(run, settings, g, out, err);
    if (*memorize_cmd) return cmd_memorize(mem, settings, g, out);
    if (*complexity_cmd) return cmd_complexity(cx, g, out, err);
    if (*serve_cmd) return cmd_serve(serve, out);
    if (*report_cmd) return cmd_report(rep, g, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_user_error() ? kExitUser : kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace tomloom::cli
