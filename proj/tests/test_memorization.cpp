#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "test_util.hpp"
#include "tomloom/memorization.hpp"

using namespace tomloom;
using namespace tomloom::testing;

namespace {

// Plain recursion over suffixes: the textbook definition, no table.
std::size_t naive_distance(const std::string& a, const std::string& b) {
  std::function<std::size_t(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    if (a[i] == b[j]) return d(i + 1, j + 1);
    return 1 + std::min({d(i + 1, j), d(i, j + 1), d(i + 1, j + 1)});
  };
  return d(0, 0);
}

// Full-matrix DP, used as the ratio oracle on longer ASCII strings.
std::size_t matrix_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> m(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) m[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) m[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      m[i][j] = std::min({m[i - 1][j] + 1, m[i][j - 1] + 1, m[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    }
  }
  return m[a.size()][b.size()];
}

std::string random_word(Rng& rng, std::size_t max_len) {
  std::string s(rng.below(max_len + 1), ' ');
  for (auto& c : s) c = static_cast<char>('a' + rng.below(4));
  return s;
}

/// Completion backend that answers with the prompt's true continuation, reversed per line.
class ReversingBackend final : public ChatBackend {
 public:
  explicit ReversingBackend(std::vector<ProblemInstance> ps) : problems_(std::move(ps)) {}
  ChatResponse complete(const ChatRequest& r) override {
    for (const auto& p : problems_) {
      const int k = prefix_length(p.size(), 0.5);
      std::string prefix, rest;
      for (int i = 0; i < p.size(); ++i) {
        const auto& t = p.sentences[static_cast<std::size_t>(i)].text;
        if (i < k) {
          prefix += t + "\n";
        } else {
          rest += (i > k ? "\n" : "") + std::string(t.rbegin(), t.rend());
        }
      }
      if (r.messages.back().text == prefix) return {rest, {}, false, 0};
    }
    return {"", {}, false, 0};
  }
  std::string model_id() const override { return "reverse"; }

 private:
  std::vector<ProblemInstance> problems_;
};

/// Returns the prompt minus its first line: an echo of what it was given.
class EchoContinuation final : public ChatBackend {
 public:
  explicit EchoContinuation(const ProblemInstance& p) : p_(p) {}
  ChatResponse complete(const ChatRequest& r) override {
    max_tokens = r.max_tokens;
    temperature = r.temperature;
    const int k = prefix_length(p_.size(), 0.5);
    std::string rest;
    for (int i = k; i < p_.size(); ++i) rest += (i > k ? "\n" : "") + p_.sentences[static_cast<std::size_t>(i)].text;
    return {"  " + rest + "\n", {}, false, 0};
  }
  std::string model_id() const override { return "echo"; }
  int max_tokens = 0;
  double temperature = -1;

 private:
  ProblemInstance p_;
};

}  // namespace

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("abcd", "abce"), 1u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(naive_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
}

TEST(Levenshtein, CountsCodePoints) {
  EXPECT_EQ(levenshtein("café", "cafe"), 1u);
  EXPECT_EQ(levenshtein("⊥", ""), 1u);
  EXPECT_EQ(levenshtein("\xff", "a"), 1u);
}

TEST(Levenshtein, MatchesNaiveOracle) {
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_word(rng, 7), b = random_word(rng, 7);
    EXPECT_EQ(levenshtein(a, b), naive_distance(a, b)) << a << " / " << b;
  }
}

TEST(Levenshtein, TriangleInequality) {
  Rng rng(32);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_word(rng, 12), b = random_word(rng, 12), c = random_word(rng, 12);
    EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
  }
}

TEST(FuzzyRatio, Examples) {
  EXPECT_EQ(fuzzy_ratio("same text", "same text"), 100.0);
  EXPECT_EQ(fuzzy_ratio("abcd", "abce"), 75.0);
  EXPECT_EQ(fuzzy_ratio("abc", ""), 0.0);
  EXPECT_EQ(fuzzy_ratio("", ""), 100.0);
  EXPECT_EQ(fuzzy_ratio(" a  b\n", "a b"), 100.0);
}

TEST(FuzzyRatio, SymmetricAndBounded) {
  Rng rng(33);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_word(rng, 15), b = random_word(rng, 15);
    const double f = fuzzy_ratio(a, b);
    EXPECT_EQ(f, fuzzy_ratio(b, a));
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 100.0);
    EXPECT_EQ(fuzzy_ratio(a, a), 100.0);
  }
}

TEST(Probe, PrefixLength) {
  EXPECT_EQ(prefix_length(10, 0.5), 5);
  EXPECT_EQ(prefix_length(5, 0.5), 3);
  EXPECT_EQ(prefix_length(2, 0.01), 1);
  EXPECT_EQ(prefix_length(2, 0.99), 1);
}

TEST(Probe, EchoIsExact) {
  const auto p = story_of_length(7);
  EchoContinuation b(p);
  const auto r = probe(p, b);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.fuzzy_score, 100.0);
  EXPECT_EQ(r.prefix_len_sentences, 4);
  EXPECT_EQ(r.continuation, "Sentence number 5.\nSentence number 6.\nSentence number 7.");
  EXPECT_EQ(b.temperature, 0.0);
  EXPECT_EQ(b.max_tokens, static_cast<int>(std::ceil(1.25 * static_cast<double>(estimate_tokens(r.continuation)))));
}

TEST(Probe, UnrelatedTextScoredByOracle) {
  const auto p = make_problem("u", {"Anne entered the hall.", "The ball is in the box.", "Anne left the hall."});
  RecordingBackend b(reply_always("Zed xyzzy went home now"));
  const auto r = probe(p, b);
  EXPECT_FALSE(r.exact);
  const std::string gen = "Zed xyzzy went home now", truth = "Anne left the hall.";
  const double oracle = 100.0 * (1.0 - static_cast<double>(matrix_distance(gen, truth)) /
                                           static_cast<double>(std::max(gen.size(), truth.size())));
  EXPECT_NEAR(r.fuzzy_score, oracle, 1e-9);
  EXPECT_EQ(b.requests[0].messages.back().text, "Anne entered the hall.\nThe ball is in the box.\n");
  EXPECT_EQ(r.continuation, truth);
}

TEST(Probe, Preconditions) {
  RecordingBackend b(reply_always("x"));
  for (auto [n, f] : {std::pair{1, 0.5}, std::pair{4, 0.0}, std::pair{4, 1.0}}) {
    try {
      probe(story_of_length(n), b, f);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::PreconditionFailed);
    }
  }
  EXPECT_TRUE(b.requests.empty());
}

TEST(Probe, ReversedContinuationsNeverExact) {
  std::vector<ProblemInstance> ps;
  for (int i = 0; i < 20; ++i) ps.push_back(story_of_length(3 + i % 5, "r" + std::to_string(i)));
  ReversingBackend b(ps);
  const auto rs = probe_all(ps, b, 0.5, 4);
  ASSERT_EQ(rs.size(), ps.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    EXPECT_EQ(rs[i].problem_id, ps[i].id);
    EXPECT_FALSE(rs[i].exact);
    if (rs[i].exact) {
      EXPECT_EQ(rs[i].fuzzy_score, 100.0);
    }
  }
  EXPECT_EQ(aggregate_memorization(rs).exact_pct, 0.0);
}

TEST(Aggregate, Examples) {
  MemorizationResult hit{"a", 1, true, 100.0, "", ""};
  auto s = aggregate_memorization({hit, hit});
  EXPECT_EQ(s.exact_pct, 100.0);
  EXPECT_EQ(s.fuzzy_mean, 100.0);
  EXPECT_EQ(s.fuzzy_std, 0.0);
  s = aggregate_memorization({{"a", 1, false, 80.0, "", ""}, hit});
  EXPECT_EQ(s.exact_pct, 50.0);
  EXPECT_EQ(s.fuzzy_mean, 90.0);
  EXPECT_EQ(s.fuzzy_std, 10.0);
  try {
    aggregate_memorization({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
}

TEST(Report, PublishedRowsBesideMeasured) {
  MemorizationResult hit{"a", 1, true, 100.0, "x", "x"};
  const std::map<Benchmark, std::vector<MemorizationResult>> results{{Benchmark::ToMi, {hit}}};
  const auto table = render_memorization_table(results);
  EXPECT_NE(table.find("52%"), std::string::npos);
  EXPECT_NE(table.find("89±15"), std::string::npos);
  const auto j = memorization_report(results, 0.5);
  EXPECT_EQ(j.at("split_fraction"), 0.5);
  const auto& row = j.at("benchmarks").at(0);
  EXPECT_EQ(row.at("published").at("exact_pct"), 52.0);
  EXPECT_EQ(row.at("published").at("fuzzy_mean"), 89.0);
  EXPECT_EQ(row.at("published").at("fuzzy_std"), 15.0);
  EXPECT_EQ(row.at("measured").at("exact_pct"), 100.0);
}

TEST(Report, PublishedValues) {
  const auto& rows = published_memorization();
  ASSERT_EQ(rows.size(), 5u);
  auto find = [&](Benchmark b) {
    for (const auto& r : rows) {
      if (r.benchmark == b) return r;
    }
    return PublishedMemorization{};
  };
  EXPECT_EQ(find(Benchmark::ToMi).exact_pct, 52);
  EXPECT_EQ(find(Benchmark::FANToM).fuzzy_mean, 74);
  EXPECT_EQ(find(Benchmark::MindGames).fuzzy_std, 18);
  EXPECT_EQ(find(Benchmark::AdvCSFB).fuzzy_mean, 51);
  EXPECT_EQ(find(Benchmark::SocialIQa).fuzzy_std, 12);
}
