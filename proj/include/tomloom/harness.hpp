#pragma once

// Experiment orchestration: evaluates every (problem, strategy) pair against a
// backend, scores answers, persists resumable per-pair results and writes the
// summary and plot-ready CSV files. Also hosts the correlation helpers and the
// best-split table.
//
// Output directory layout:
//   pairs/<config hash>/<strategy>/<problem>.json   one finished pair (resume unit)
//   results.jsonl                                   merged rows, no timing fields
//   resultset.json                                  aggregates + provenance
//   summary.csv                                     one row per (benchmark, strategy)
//   figure_data/accuracy.csv                        accuracy and error rate per strategy

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tomloom/complexity.hpp"
#include "tomloom/core.hpp"
#include "tomloom/gateway.hpp"
#include "tomloom/strategies.hpp"

namespace tomloom {

// --- scoring ----------------------------------------------------------------

/// Index of the choice an answer names: a bare letter ("b", "(B)", "B."), a
/// normalized-equal choice, or the one choice contained in the answer (or
/// containing it). nullopt when none or several match.
std::optional<std::size_t> match_choice(std::string_view answer, const std::vector<std::string>& choices);

/// Free answers: normalized equality with gold. Multiple choice: the matched
/// choice must be the gold one.
bool omega(const ExtractedAnswer& answer, const ProblemInstance& p);

// --- runs -------------------------------------------------------------------

struct RunConfig {
  std::vector<ProblemInstance> problems;
  std::vector<StrategyConfig> strategies;
  std::optional<std::size_t> sample_n;
  std::uint64_t sample_seed = 0;
  int workers = 1;
  std::string output_dir;
  std::string backend_ref;  // provenance label, e.g. "mock:script.json"
  /// Stops handing out pairs after this many newly finished ones and skips the
  /// merge, as if the process had been killed.
  std::optional<std::size_t> stop_after;
  /// Checked before each pair; set from a signal handler to stop early.
  const std::atomic<bool>* cancel = nullptr;
};

struct PairResult {
  std::string problem_id;
  Benchmark benchmark = Benchmark::Other;
  std::string strategy;  // StrategyConfig::key()
  int splits = 0;        // DWM only
  std::string answer;
  bool correct = false;
  std::optional<std::string> error;
  Usage usage;
  std::string transcript_ref;  // relative to the output directory
};

struct SummaryRow {
  Benchmark benchmark = Benchmark::Other;
  std::string strategy;
  int splits = 0;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t errors = 0;
  double accuracy = 0.0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct Provenance {
  std::string model_id;
  std::string backend;
  std::string config_hash;
  std::string timestamp;  // UTC, ISO 8601
};

struct ResultSet {
  std::vector<PairResult> rows;  // problem order within strategy order
  std::vector<SummaryRow> summary;
  std::map<std::string, double> accuracy;  // per strategy, over every benchmark
  Provenance provenance;
  bool complete = false;  // false when stopped before every pair finished
  std::size_t resumed = 0;  // pairs loaded from disk instead of evaluated
};

/// Identity of a run for resume purposes: strategies, model and problem set.
std::string config_hash(const RunConfig& cfg, const std::string& model_id);

/// Config problems (empty dataset, bad strategy, workers < 1, oversized sample)
/// throw before any backend call. Per-pair failures become error rows.
ResultSet run_experiment(const RunConfig& cfg, ChatBackend& backend);

/// Groups rows by (benchmark, strategy); error rows count as incorrect.
std::vector<SummaryRow> summarize(const std::vector<PairResult>& rows);

void to_json(Json& j, const PairResult& r);
void from_json(const Json& j, PairResult& r);

std::vector<PairResult> load_results(const std::string& results_jsonl);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

// --- published reference values --------------------------------------------

struct PublishedAccuracy {
  Benchmark benchmark;
  double dwm;
  double cot;
};
/// Best accuracy across models for DWM and CoT, per benchmark.
const std::vector<PublishedAccuracy>& published_accuracy();

struct PublishedStateStats {
  Benchmark benchmark;
  double statefulness_mean, statefulness_std;
  double statelessness_mean, statelessness_std;
  int best_split;
};
const std::vector<PublishedStateStats>& published_state_stats();

/// Text table of summary rows with the published DWM/CoT accuracy beside each row.
std::string render_accuracy_report(const std::vector<SummaryRow>& rows);

// --- correlation --------------------------------------------------------------

/// Pearson product-moment coefficient. Throws Error{PreconditionFailed} on
/// mismatched or short input, Error{DegenerateInput} on zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

/// Pearson over average ranks (ties share their mean rank).
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

enum class CorrelationStat { Pearson, Spearman };

struct ComplexityErrorPoint {
  std::string label;  // benchmark name, or problem id in per-instance mode
  double complexity = 0.0;
  double error_rate = 0.0;  // 1 - accuracy
};

struct CorrelationReport {
  std::vector<ComplexityErrorPoint> points;
  CorrelationStat stat = CorrelationStat::Pearson;
  double coefficient = 0.0;
};

/// One point per benchmark: mean complexity of its annotated problems against
/// the error rate of `strategy` on that benchmark. With `per_instance`, one
/// point per annotated problem (error rate 0 or 1).
CorrelationReport correlate_complexity_error(const std::vector<PairResult>& rows,
                                             const std::vector<ProblemInstance>& problems,
                                             const std::vector<AnnotationSet>& annotations,
                                             const std::string& strategy, double tau = kDefaultTau,
                                             CorrelationStat stat = CorrelationStat::Pearson,
                                             bool per_instance = false);

void write_correlation_csv(std::ostream& out, const CorrelationReport& report);

// --- best split -------------------------------------------------------------

struct BestSplitRow {
  Benchmark benchmark = Benchmark::Other;
  int best_split = 0;
  double accuracy = 0.0;
  std::optional<double> statefulness_mean;
  std::optional<int> published_best_split;
};

/// Highest-accuracy DWM split per benchmark, ties to the smaller split. A
/// benchmark without any split throws Error{MissingSplits}; with `strict`,
/// so does one missing any of 1..5.
std::vector<BestSplitRow> best_split_report(const std::map<Benchmark, std::map<int, double>>& accuracy_by_split,
                                            const std::vector<BenchmarkStats>& stats, bool strict = false);

/// Collects DWM accuracies by split from summary rows.
std::map<Benchmark, std::map<int, double>> dwm_accuracy_by_split(const std::vector<SummaryRow>& rows);

std::string render_best_split_table(const std::vector<BestSplitRow>& rows);

}  // namespace tomloom
