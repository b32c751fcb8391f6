#include "tomloom/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace tomloom {

std::vector<StateEventMark> partition(const AnnotationSet& a, std::string_view object_id) {
  if (a.find_object(object_id) == nullptr) {
    throw Error(Errc::UnknownObject, "no tracked object '" + std::string(object_id) + "'");
  }
  std::vector<int> marks;
  for (const auto& e : a.events) {
    if (e.object_id == object_id) marks.push_back(e.boundary_after_sentence);
  }
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  std::vector<StateEventMark> out;
  out.reserve(marks.size());
  for (int m : marks) out.push_back({std::string(object_id), m});
  return out;
}

int statefulness(const AnnotationSet& a, std::string_view object_id) {
  return static_cast<int>(partition(a, object_id).size());
}

int statelessness(const AnnotationSet& a) {
  int total = 0;
  for (const auto& o : a.objects) {
    if (o.object_id == a.question_object_id) continue;
    total += statefulness(a, o.object_id);
  }
  return total;
}

ComplexityReport complexity(const AnnotationSet& a, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(Errc::TauOutOfRange, "tau must lie in [0, 1], got " + std::to_string(tau));
  }
  ComplexityReport r;
  r.problem_id = a.problem_id;
  r.statefulness = statefulness(a, a.question_object_id);
  r.statelessness_raw = statelessness(a);
  r.tau = tau;
  r.complexity = static_cast<double>(r.statefulness) + tau * static_cast<double>(r.statelessness_raw);
  return r;
}

std::vector<double> tau_sweep(double low, double high, int steps) {
  if (steps < 1 || low > high || low < 0.0 || high > 1.0) {
    throw Error(Errc::TauOutOfRange, "invalid tau sweep");
  }
  std::vector<double> out;
  for (int i = 0; i <= steps; ++i) out.push_back(low + (high - low) * i / steps);
  out.back() = high;
  return out;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "mean of no values");
  // Summation over sorted values so the result does not depend on input order.
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  std::vector<double> sq;
  sq.reserve(sorted.size());
  for (double v : sorted) sq.push_back((v - mean) * (v - mean));
  std::sort(sq.begin(), sq.end());
  const double var = std::accumulate(sq.begin(), sq.end(), 0.0) / n;
  return {mean, std::sqrt(var)};
}

std::vector<BenchmarkStats> aggregate_stats(const std::map<Benchmark, std::vector<ComplexityReport>>& groups) {
  std::vector<BenchmarkStats> out;
  for (const auto& [benchmark, reports] : groups) {
    if (reports.empty()) {
      throw Error(Errc::EmptyGroup, "no reports for benchmark " + std::string(to_string(benchmark)));
    }
    std::vector<double> sf, sl;
    for (const auto& r : reports) {
      sf.push_back(r.statefulness);
      sl.push_back(r.statelessness_raw);
    }
    const auto a = mean_std(sf);
    const auto b = mean_std(sl);
    out.push_back({benchmark, a.mean, a.std, b.mean, b.std, static_cast<int>(reports.size())});
  }
  return out;
}

void to_json(Json& j, const BenchmarkStats& s) {
  j = Json{{"benchmark", to_string(s.benchmark)},
           {"statefulness_mean", s.statefulness_mean},
           {"statefulness_std", s.statefulness_std},
           {"statelessness_mean", s.statelessness_mean},
           {"statelessness_std", s.statelessness_std},
           {"n", s.n_samples}};
}

void write_benchmark_stats_csv(std::ostream& out, const std::vector<BenchmarkStats>& stats) {
  out << "benchmark,statefulness_mean,statefulness_std,statelessness_mean,statelessness_std,n\n";
  for (const auto& s : stats) {
    out << to_string(s.benchmark) << ',' << s.statefulness_mean << ',' << s.statefulness_std << ','
        << s.statelessness_mean << ',' << s.statelessness_std << ',' << s.n_samples << '\n';
  }
}

}  // namespace tomloom
