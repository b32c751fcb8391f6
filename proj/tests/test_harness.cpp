#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"
#include "tomloom/harness.hpp"

using namespace tomloom;
using namespace tomloom::testing;

namespace {

ProblemInstance mc(std::vector<std::string> choices, std::string gold) {
  auto p = story_of_length(2, "mc");
  p.choices = std::move(choices);
  p.gold_answer = std::move(gold);
  return p;
}

ExtractedAnswer ans(const std::string& a) { return ExtractedAnswer{a, a, true}; }

RunConfig fixture_run(const std::string& out, std::vector<StrategyConfig> strategies) {
  RunConfig cfg;
  cfg.problems = load_problems(fixture("harness/problems.jsonl"));
  cfg.strategies = std::move(strategies);
  cfg.output_dir = out;
  cfg.backend_ref = "mock:harness";
  return cfg;
}

MockBackend fixture_backend() { return MockBackend(MockScript::load(fixture("harness/mock.json"))); }

std::string results_hash(const std::string& dir) { return sha256_hex(read_file(dir + "/results.jsonl")); }

// Closed form: r = Sxy / sqrt(Sxx * Syy) over deviations from the means.
double closed_form_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

// --- omega ---------------------------------------------------------------------

TEST(Omega, FreeAnswer) {
  const auto p = story_of_length(2);  // gold "box"
  EXPECT_TRUE(omega(ans("Box."), p));
  EXPECT_FALSE(omega(ans("the box"), p));
  EXPECT_FALSE(omega(ans(""), p));
  auto q = p;
  q.gold_answer = "drawer";
  EXPECT_TRUE(omega(ans("Drawer."), q));
}

TEST(Omega, MultipleChoice) {
  const auto p = mc({"basket", "drawer", "green box"}, "drawer");
  EXPECT_TRUE(omega(ans("b"), p));
  EXPECT_TRUE(omega(ans("(B)"), p));
  EXPECT_TRUE(omega(ans("Drawer"), p));
  EXPECT_TRUE(omega(ans("in the drawer"), p));
  EXPECT_FALSE(omega(ans("a"), p));
  EXPECT_FALSE(omega(ans("d"), p));
  EXPECT_FALSE(omega(ans("garage"), p));
  EXPECT_FALSE(omega(ans("basket or drawer"), p));
}

TEST(Omega, LongerChoiceWinsContainment) {
  const std::vector<std::string> nli{"entailment", "not_entailment"};
  EXPECT_EQ(match_choice("not_entailment", nli), 1u);
  EXPECT_EQ(match_choice("the answer is not_entailment", nli), 1u);
  EXPECT_EQ(match_choice("entailment", nli), 0u);
  EXPECT_EQ(match_choice("", nli), std::nullopt);
}

// --- statistics ------------------------------------------------------------------

TEST(Pearson, FixtureVectors) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_NEAR(pearson(x, {3, 5, 7}), 1.0, 1e-9);
  EXPECT_NEAR(pearson(x, {-1, -2, -3}), -1.0, 1e-9);
  EXPECT_NEAR(pearson(x, {1, 3, 2}), 0.5, 1e-9);
  EXPECT_NEAR(pearson(x, {1, 3, 2}), closed_form_pearson(x, {1, 3, 2}), 1e-12);
}

TEST(Pearson, MatchesClosedFormOnRandomData) {
  Rng rng(41);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.below(1000)) / 7.0;
      y[i] = static_cast<double>(rng.below(1000)) / 3.0;
    }
    if (closed_form_pearson(x, y) != closed_form_pearson(x, y)) continue;  // zero variance
    EXPECT_NEAR(pearson(x, y), closed_form_pearson(x, y), 1e-9);
  }
}

TEST(Pearson, Errors) {
  auto code = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  EXPECT_EQ(code([] { pearson({1, 1, 1}, {1, 2, 3}); }), Errc::DegenerateInput);
  EXPECT_EQ(code([] { pearson({1}, {1}); }), Errc::PreconditionFailed);
  EXPECT_EQ(code([] { pearson({1, 2}, {1, 2, 3}); }), Errc::PreconditionFailed);
}

TEST(Spearman, Ranks) {
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 1000, 10000}), 1.0, 1e-12);
  EXPECT_NEAR(spearman({1, 2, 3}, {3, 2, 1}), -1.0, 1e-12);
  // Ties share the average rank: ranks {1.5, 1.5, 3} against {1, 2, 3}.
  EXPECT_NEAR(spearman({5, 5, 9}, {1, 2, 3}), closed_form_pearson({1.5, 1.5, 3}, {1, 2, 3}), 1e-12);
}

TEST(Correlation, PerBenchmarkPoints) {
  std::vector<ProblemInstance> problems;
  std::vector<AnnotationSet> anns;
  std::vector<PairResult> rows;
  int k = 0;
  for (auto [b, events, correct] : {std::tuple{Benchmark::ToMi, 1, 4}, std::tuple{Benchmark::FANToM, 3, 2},
                                    std::tuple{Benchmark::AdvCSFB, 2, 3}}) {
    for (int i = 0; i < 4; ++i, ++k) {
      auto p = story_of_length(5, "p" + std::to_string(k));
      p.benchmark = b;
      AnnotationSet a;
      a.problem_id = p.id;
      a.objects = {physical("ball")};
      for (int e = 1; e <= events; ++e) a.events.push_back({"ball", e});
      a.question_object_id = "ball";
      PairResult r;
      r.problem_id = p.id;
      r.benchmark = b;
      r.strategy = "cot";
      r.correct = i < correct;
      problems.push_back(p);
      anns.push_back(a);
      rows.push_back(r);
    }
  }
  const auto rep = correlate_complexity_error(rows, problems, anns, "cot");
  ASSERT_EQ(rep.points.size(), 3u);
  EXPECT_NEAR(rep.coefficient, closed_form_pearson({1, 3, 2}, {0.0, 0.5, 0.25}), 1e-12);
  const auto per = correlate_complexity_error(rows, problems, anns, "cot", 0.1, CorrelationStat::Pearson, true);
  EXPECT_EQ(per.points.size(), 12u);
  std::ostringstream csv;
  write_correlation_csv(csv, rep);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "label,complexity,error_rate");
}

// --- best split -------------------------------------------------------------------

TEST(BestSplit, ArgmaxAndTies) {
  auto rows = best_split_report({{Benchmark::ToMi, {{1, 0.5}, {3, 0.7}, {5, 0.6}}},
                                 {Benchmark::FANToM, {{2, 0.7}, {4, 0.7}}}},
                                {});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].benchmark, Benchmark::ToMi);
  EXPECT_EQ(rows[0].best_split, 3);
  EXPECT_EQ(rows[0].published_best_split, 3);
  EXPECT_EQ(rows[1].best_split, 2);
}

TEST(BestSplit, MissingSplits) {
  try {
    best_split_report({{Benchmark::ToMi, {}}}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingSplits);
  }
  EXPECT_THROW(best_split_report({{Benchmark::ToMi, {{1, 0.5}, {3, 0.7}}}}, {}, true), Error);
  EXPECT_NO_THROW(best_split_report({{Benchmark::ToMi, {{1, .1}, {2, .2}, {3, .3}, {4, .4}, {5, .5}}}}, {}, true));
}

TEST(BestSplit, TableShowsPublishedColumn) {
  const auto rows = best_split_report({{Benchmark::AdvCSFB, {{1, 0.5}, {4, 0.9}}}},
                                      {BenchmarkStats{Benchmark::AdvCSFB, 3.0, 1.0, 2.0, 1.0, 10}});
  EXPECT_EQ(rows[0].statefulness_mean, 3.0);
  const auto table = render_best_split_table(rows);
  EXPECT_NE(table.find("AdvCSFB"), std::string::npos);
  EXPECT_NE(table.find("published"), std::string::npos);
}

TEST(Published, ReferenceValues) {
  const auto& acc = published_accuracy();
  ASSERT_EQ(acc.size(), 5u);
  for (const auto& a : acc) {
    if (a.benchmark == Benchmark::AdvCSFB) {
      EXPECT_EQ(a.dwm, 0.8364);
      EXPECT_EQ(a.cot, 0.7091);
    }
  }
  const auto& st = published_state_stats();
  ASSERT_EQ(st.size(), 5u);
  std::vector<int> best;
  for (auto b : {Benchmark::ToMi, Benchmark::FANToM, Benchmark::MindGames, Benchmark::AdvCSFB, Benchmark::SocialIQa}) {
    for (const auto& s : st) {
      if (s.benchmark == b) best.push_back(s.best_split);
    }
  }
  EXPECT_EQ(best, (std::vector<int>{3, 3, 1, 4, 1}));
}

TEST(Report, AccuracyReportShowsPublished) {
  SummaryRow r{Benchmark::AdvCSFB, "dwm-2", 2, 10, 8, 0, 0.8, 100, 10};
  const auto text = render_accuracy_report({r});
  EXPECT_NE(text.find("0.8364"), std::string::npos);
  EXPECT_NE(text.find("0.7091"), std::string::npos);
}

// --- runs ---------------------------------------------------------------------------

TEST(Run, FixtureAccuracyMatchesHandCount) {
  const auto expected = Json::parse(read_file(fixture("harness/expected_correct.json")));
  std::size_t hand = 0;
  for (const auto& [id, ok] : expected.items()) hand += ok.get<bool>();
  ASSERT_EQ(hand, 15u);

  TempDir dir;
  auto backend = fixture_backend();
  const auto rs = run_experiment(fixture_run(dir.str(), {StrategyConfig::cot(), StrategyConfig::dwm(2)}), backend);
  EXPECT_TRUE(rs.complete);
  ASSERT_EQ(rs.rows.size(), 40u);
  for (const auto& r : rs.rows) EXPECT_EQ(r.correct, expected.at(r.problem_id).get<bool>()) << r.strategy << " " << r.problem_id;
  EXPECT_EQ(rs.accuracy.at("cot"), 0.75);
  EXPECT_EQ(rs.accuracy.at("dwm-2"), 0.75);
  EXPECT_EQ(backend.calls(), 20 + 20 * 3);
}

TEST(Run, WritesArtifacts) {
  TempDir dir;
  auto backend = fixture_backend();
  run_experiment(fixture_run(dir.str(), {StrategyConfig::cot()}), backend);
  for (const char* f : {"results.jsonl", "resultset.json", "summary.csv", "figure_data/accuracy.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  }
  const auto rs = Json::parse(read_file(dir.str("resultset.json")));
  EXPECT_EQ(rs.at("aggregates").at("cot").at("accuracy"), 0.75);
  EXPECT_EQ(rs.at("provenance").at("model_id"), "mock");
  EXPECT_EQ(rs.at("provenance").at("results_sha256"), results_hash(dir.str()));
  const auto rows = load_results(dir.str("results.jsonl"));
  ASSERT_EQ(rows.size(), 20u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / rows[0].transcript_ref));
  const auto csv = read_file(dir.str("summary.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "benchmark,strategy,splits,accuracy,n,input_tokens,output_tokens");
  EXPECT_NE(csv.find("ToMi,cot,,0.75,20,"), std::string::npos);
}

TEST(Run, DeterministicAcrossRunsAndWorkers) {
  TempDir a, b;
  auto b1 = fixture_backend();
  auto b2 = fixture_backend();
  run_experiment(fixture_run(a.str(), {StrategyConfig::cot(), StrategyConfig::tot(2)}), b1);
  auto cfg = fixture_run(b.str(), {StrategyConfig::cot(), StrategyConfig::tot(2)});
  cfg.workers = 6;
  run_experiment(cfg, b2);
  EXPECT_EQ(results_hash(a.str()), results_hash(b.str()));
}

TEST(Run, ResumeAfterKillConverges) {
  TempDir clean, killed;
  const std::vector<StrategyConfig> strategies{StrategyConfig::cot(), StrategyConfig::dwm(3)};
  auto b1 = fixture_backend();
  run_experiment(fixture_run(clean.str(), strategies), b1);

  auto cfg = fixture_run(killed.str(), strategies);
  cfg.stop_after = 20;
  cfg.workers = 3;
  auto b2 = fixture_backend();
  const auto partial = run_experiment(cfg, b2);
  EXPECT_FALSE(partial.complete);
  EXPECT_FALSE(std::filesystem::exists(killed.path() / "results.jsonl"));

  cfg.stop_after.reset();
  auto b3 = fixture_backend();
  const auto resumed = run_experiment(cfg, b3);
  EXPECT_TRUE(resumed.complete);
  EXPECT_EQ(resumed.resumed, partial.rows.size());
  EXPECT_EQ(results_hash(killed.str()), results_hash(clean.str()));
  // Only the missing pairs reached the backend the second time.
  EXPECT_LT(b3.calls(), b1.calls());

  auto b4 = fixture_backend();
  const auto again = run_experiment(cfg, b4);
  EXPECT_EQ(again.resumed, 40u);
  EXPECT_EQ(b4.calls(), 0);
}

TEST(Run, CancelFlagStopsEarly) {
  TempDir dir;
  std::atomic<bool> cancel{true};
  auto cfg = fixture_run(dir.str(), {StrategyConfig::cot()});
  cfg.cancel = &cancel;
  auto backend = fixture_backend();
  const auto rs = run_experiment(cfg, backend);
  EXPECT_FALSE(rs.complete);
  EXPECT_EQ(backend.calls(), 0);
}

TEST(Run, BackendFailuresBecomeErrorRows) {
  class Flaky final : public ChatBackend {
   public:
    ChatResponse complete(const ChatRequest& r) override {
      if (r.messages.back().text.find("grape") != std::string::npos) throw Error(Errc::Timeout, "no reply");
      return {"<answer>x</answer>", {3, 1, true}, false, 0};
    }
    std::string model_id() const override { return "flaky"; }
  } backend;
  TempDir dir;
  const auto rs = run_experiment(fixture_run(dir.str(), {StrategyConfig::cot()}), backend);
  EXPECT_TRUE(rs.complete);
  std::size_t errors = 0;
  for (const auto& r : rs.rows) {
    if (r.error) {
      ++errors;
      EXPECT_FALSE(r.correct);
      EXPECT_TRUE(std::filesystem::exists(dir.path() / r.transcript_ref));
    }
  }
  EXPECT_EQ(errors, 1u);
  EXPECT_EQ(rs.summary.at(0).errors, 1u);
}

TEST(Run, ConfigErrorsBeforeAnyCall) {
  TempDir dir;
  auto backend = fixture_backend();
  auto cfg = fixture_run(dir.str(), {StrategyConfig::cot()});
  cfg.workers = 0;
  EXPECT_THROW(run_experiment(cfg, backend), Error);
  cfg.workers = 1;
  cfg.strategies = {StrategyConfig::dwm(9)};
  EXPECT_THROW(run_experiment(cfg, backend), Error);
  cfg.strategies = {StrategyConfig::cot()};
  cfg.sample_n = 21;
  EXPECT_THROW(run_experiment(cfg, backend), Error);
  cfg.sample_n.reset();
  cfg.problems.clear();
  EXPECT_THROW(run_experiment(cfg, backend), Error);
  EXPECT_EQ(backend.calls(), 0);
}

TEST(Run, SampleAndHash) {
  TempDir dir;
  auto backend = fixture_backend();
  auto cfg = fixture_run(dir.str(), {StrategyConfig::cot()});
  cfg.sample_n = 5;
  cfg.sample_seed = 4;
  const auto rs = run_experiment(cfg, backend);
  EXPECT_EQ(rs.rows.size(), 5u);
  const auto h = config_hash(cfg, "mock");
  cfg.sample_seed = 5;
  EXPECT_NE(config_hash(cfg, "mock"), h);
  cfg.sample_seed = 4;
  EXPECT_NE(config_hash(cfg, "other-model"), h);
  EXPECT_EQ(config_hash(cfg, "mock"), h);
}

TEST(Summary, AccuracyIsMeanOfBits) {
  Rng rng(42);
  std::vector<PairResult> rows;
  std::size_t correct = 0;
  for (int i = 0; i < 97; ++i) {
    PairResult r;
    r.problem_id = std::to_string(i);
    r.strategy = "cot";
    r.correct = rng.coin();
    correct += r.correct;
    rows.push_back(r);
  }
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].accuracy, static_cast<double>(correct) / 97.0);
}
