#pragma once

// Statefulness, statelessness and discounted complexity of a ToM task, computed
// from a state-event annotation:
//
//   complexity = T(target) + tau * sum over other objects of T(obj)
//
// where T(obj) is the number of state events (partition size) of obj.

#include <iosfwd>
#include <map>
#include <string_view>
#include <vector>

#include "tomloom/core.hpp"

namespace tomloom {

inline constexpr double kDefaultTau = 0.1;
inline constexpr double kTauBandLow = 0.05;
inline constexpr double kTauBandHigh = 0.2;

/// The state events of one object, ascending and without duplicates.
/// Throws Error{UnknownObject} when `object_id` is not declared.
std::vector<StateEventMark> partition(const AnnotationSet& a, std::string_view object_id);

int statefulness(const AnnotationSet& a, std::string_view object_id);

/// Undiscounted sum of statefulness over every object except the question target.
int statelessness(const AnnotationSet& a);

/// Throws Error{TauOutOfRange} unless 0 <= tau <= 1.
ComplexityReport complexity(const AnnotationSet& a, double tau = kDefaultTau);

/// `steps + 1` evenly spaced tau values over [low, high].
std::vector<double> tau_sweep(double low = kTauBandLow, double high = kTauBandHigh, int steps = 3);

struct BenchmarkStats {
  Benchmark benchmark = Benchmark::Other;
  double statefulness_mean = 0.0;
  double statefulness_std = 0.0;
  double statelessness_mean = 0.0;
  double statelessness_std = 0.0;
  int n_samples = 0;
};

/// Mean and population (1/n) standard deviation per benchmark, in benchmark
/// enum order. Throws Error{EmptyGroup} for a group without reports.
std::vector<BenchmarkStats> aggregate_stats(const std::map<Benchmark, std::vector<ComplexityReport>>& groups);

/// Population mean and standard deviation. Empty input throws Error{EmptyInput}.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

void to_json(Json& j, const BenchmarkStats& s);

/// `benchmark_stats.csv`: benchmark,statefulness_mean,statefulness_std,statelessness_mean,statelessness_std,n
void write_benchmark_stats_csv(std::ostream& out, const std::vector<BenchmarkStats>& stats);

}  // namespace tomloom
