#pragma once

// Loaders for the native benchmark layouts. Each produces normalized
// ProblemInstance values; see docs/datasets.md for the exact columns.
//
//   ToMi       text: "N sentence" lines, closed by "N question<TAB>answer[<TAB>...]"
//   SocialIQa  JSONL: context, question, answerA, answerB, answerC, label (1..3)
//   MindGames  JSONL: premise, hypothesis, label [, choices]
//   AdvCSFB    JSONL: story, question, answer [, choices]
//   FANToM     JSONL: context, question, answer [, choices]; one utterance per line
//
// A JSONL row that already has a "sentences" field is taken as normalized and
// passed through unchanged.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tomloom/core.hpp"

namespace tomloom {

/// Newline split first, then a split after sentence-terminal punctuation that is
/// followed by whitespace. Empty pieces are dropped.
std::vector<std::string> split_story(std::string_view story);

/// Parses a whole native file. Errors name the 1-based source line.
std::vector<ProblemInstance> parse_dataset(Benchmark benchmark, std::string_view text);

struct IngestReport {
  std::size_t count = 0;
  std::size_t passthrough = 0;  // rows that were already normalized
};

/// Reads `input_path`, writes problems JSONL to `output_path`.
IngestReport ingest(Benchmark benchmark, const std::string& input_path, const std::string& output_path);

/// Uniform sample without replacement, deterministic per seed, source order kept.
/// Throws Error{SampleTooLarge} when n exceeds the dataset.
std::vector<ProblemInstance> sample(const std::vector<ProblemInstance>& dataset, std::size_t n, std::uint64_t seed);

}  // namespace tomloom
