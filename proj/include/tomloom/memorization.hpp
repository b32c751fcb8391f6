#pragma once

// Memorization probe: give a completion model the first part of a benchmark item
// and score how much of the true continuation comes back.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tomloom/core.hpp"
#include "tomloom/gateway.hpp"

namespace tomloom {

/// Unit-cost edit distance over Unicode code points (invalid UTF-8 bytes count as one unit each).
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 100 * (1 - levenshtein / max length) on whitespace-normalized inputs; two empty strings score 100.
double fuzzy_ratio(std::string_view a, std::string_view b);

inline constexpr double kDefaultSplitFraction = 0.5;

struct MemorizationResult {
  std::string problem_id;
  int prefix_len_sentences = 0;
  bool exact = false;
  double fuzzy_score = 0.0;
  std::string continuation;  // true continuation
  std::string generated;
};

/// Number of prefix sentences: ceil(fraction * n), clamped to [1, n - 1].
int prefix_length(int n_sentences, double split_fraction);

/// Throws Error{PreconditionFailed} for a story under two sentences or a fraction outside (0, 1).
MemorizationResult probe(const ProblemInstance& p, ChatBackend& backend, double split_fraction = kDefaultSplitFraction);

std::vector<MemorizationResult> probe_all(const std::vector<ProblemInstance>& problems, ChatBackend& backend,
                                          double split_fraction, int workers);

struct MemorizationSummary {
  double exact_pct = 0.0;
  double fuzzy_mean = 0.0;
  double fuzzy_std = 0.0;
  std::size_t n = 0;
};

/// Throws Error{EmptyInput} on no results.
MemorizationSummary aggregate_memorization(const std::vector<MemorizationResult>& results);

/// Published perfect-match and fuzzy rows per benchmark.
struct PublishedMemorization {
  Benchmark benchmark;
  double exact_pct;
  double fuzzy_mean;
  double fuzzy_std;
};
const std::vector<PublishedMemorization>& published_memorization();

void to_json(Json& j, const MemorizationResult& r);
void to_json(Json& j, const MemorizationSummary& s);

/// `memorization_report.json`: per-item results, per-benchmark aggregates and the published row.
Json memorization_report(const std::map<Benchmark, std::vector<MemorizationResult>>& results, double split_fraction);

/// Plain-text table, measured values beside the published ones.
std::string render_memorization_table(const std::map<Benchmark, std::vector<MemorizationResult>>& results);

}  // namespace tomloom
