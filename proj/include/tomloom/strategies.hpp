#pragma once

// Prompting strategies: Discrete World Models (DWM), chain of thought (CoT),
// tree of thoughts (ToT) and structured-representation (JSON/YAML) prompting.
//
// DWM splits the story into chunks p_1..p_T. After each chunk the model is asked
// for a succinct state description a_t (prompt w); the final question y rides on
// top of the whole accumulated conversation:
//
//   x  p_1 w a_1  p_2 w a_2  ...  p_T w a_T  y  -> answer
//
// Consecutive user pieces are sent as one message, joined by a blank line.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tomloom/core.hpp"
#include "tomloom/gateway.hpp"

namespace tomloom {

enum class Strategy { DWM, CoT, ToT, StructJSON, StructYAML };

std::string_view to_string(Strategy s) noexcept;
/// "dwm", "cot", "tot", "json", "yaml" (case-insensitive; "struct-json" etc. also accepted).
Strategy parse_strategy(std::string_view name);

struct StrategyConfig {
  Strategy strategy = Strategy::CoT;
  int splits = 1;       // DWM only, 1..5
  int tot_experts = 3;  // ToT only
  double temperature = 0.0;
  /// DWM: send y together with the last chunk (T calls) instead of after a_T (T + 1 calls).
  bool fuse_final = false;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;
  std::string model_id;  // empty: the backend's own model

  static StrategyConfig dwm(int splits);
  static StrategyConfig cot();
  static StrategyConfig tot(int experts = 3);
  static StrategyConfig structured(Strategy format);

  /// Stable identifier used in result files: "dwm-3", "cot", "tot", "json", "yaml".
  std::string key() const;
};

/// Throws Error{InvalidArgument} on an out-of-range field.
void validate(const StrategyConfig& cfg);

// --- chunking ---------------------------------------------------------------

struct ChunkRange {
  int first = 1;  // 1-based sentence indices, inclusive
  int last = 1;

  int size() const noexcept { return last - first + 1; }
  friend bool operator==(const ChunkRange&, const ChunkRange&) = default;
};

struct ChunkPlan {
  std::vector<ChunkRange> chunks;

  int effective_splits() const noexcept { return static_cast<int>(chunks.size()); }
  std::vector<int> sizes() const;
};

/// Contiguous chunks as even as possible; the first |p| mod T chunks carry one
/// extra sentence. T is clamped to |p|.
ChunkPlan split_sentences(const ProblemInstance& p, int splits);

/// Chunks ending after each listed sentence (the story end is implied).
ChunkPlan split_after(const ProblemInstance& p, const std::vector<int>& cut_after);

/// Chunks ending at each state event of the annotation's question object.
ChunkPlan split_by_events(const ProblemInstance& p, const AnnotationSet& a);

// --- transcripts ------------------------------------------------------------

enum class Role { User, Model };
enum class TurnTag { PreambleX, ChunkP, InterleaveW, AnswerA, FinalY, Raw };

std::string_view to_string(TurnTag t) noexcept;

struct Turn {
  Role role = Role::User;
  std::string text;
  TurnTag tag = TurnTag::Raw;
  int call = 0;  // 1-based backend call this turn belongs to
};

struct Transcript {
  std::string strategy;
  std::vector<Turn> turns;
  int calls = 0;
  Usage usage;
};

/// Chat messages for a conversation: consecutive turns of one role merged with "\n\n".
std::vector<Message> to_messages(const std::vector<Turn>& turns);

/// Every turn text joined with "\n\n", through the last user turn.
std::string final_query(const Transcript& t);

/// DWM transcripts: x (p w a)^T y a, or x (p w a)^(T-1) p w y a when fused.
bool check_dwm_grammar(const Transcript& t, int splits, bool fused);

void to_json(Json& j, const Transcript& t);

// --- answers ----------------------------------------------------------------

struct ExtractedAnswer {
  std::string raw;
  std::string answer;
  bool found_tags = false;
};

/// Innermost complete <answer>...</answer> span, normalized; without tags the
/// last non-empty line is used and found_tags is false.
ExtractedAnswer extract_answer(std::string_view text);

// --- templates --------------------------------------------------------------

struct TemplateSet {
  std::string cot;
  std::string tot_propose;
  std::string tot_vote;
  std::string tot_answer;
  std::string dwm_preamble;
  std::string dwm_interleave;
  std::string dwm_question;
  std::string struct_represent;
  std::string struct_answer;

  static const TemplateSet& builtin();
  /// Files named <field>.txt in `dir` override the built-in text.
  static TemplateSet load(const std::string& dir);
};

/// Replaces each {name} for which `vars` has an entry; other braces are kept.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars);

/// "" without choices, else "\nChoices:\nA. ...\nB. ...".
std::string render_choices(const ProblemInstance& p);

// --- runs -------------------------------------------------------------------

struct StrategyResult {
  Transcript transcript;
  ExtractedAnswer answer;
};

/// A backend failure during a run, with everything exchanged before it.
class StrategyError : public Error {
 public:
  StrategyError(const Error& cause, Transcript partial)
      : Error(cause), partial_(std::move(partial)) {}
  const Transcript& partial() const noexcept { return partial_; }

 private:
  Transcript partial_;
};

StrategyResult dwm_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                       const TemplateSet& templates = TemplateSet::builtin(),
                       const std::optional<ChunkPlan>& plan = std::nullopt);
StrategyResult cot_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                       const TemplateSet& templates = TemplateSet::builtin());
StrategyResult tot_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                       const TemplateSet& templates = TemplateSet::builtin());
StrategyResult struct_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                          const TemplateSet& templates = TemplateSet::builtin());

/// Dispatches on cfg.strategy.
StrategyResult run_strategy(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                            const TemplateSet& templates = TemplateSet::builtin());

// ToT helpers.

/// One candidate per non-empty line, list markers stripped, at most 8.
std::vector<std::string> parse_candidates(std::string_view text);
/// 1-based id from the last "The best choice is N"; nullopt if absent or out of range.
std::optional<int> parse_vote(std::string_view text, int n_candidates);
/// Majority over parsed votes, ties to the lowest id; nullopt when no vote parsed.
std::optional<int> tally_votes(const std::vector<std::optional<int>>& votes);

// --- cost -------------------------------------------------------------------

struct CostEstimate {
  std::int64_t calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  friend bool operator==(const CostEstimate&, const CostEstimate&) = default;
};

/// Token accounting for a story of n tokens, T splits, answers of o tokens and
/// m ToT experts:
///   CoT    {1, n, o}
///   DWM    {T, sum_t (t*n/T + (t-1)*o), T*o}
///   ToT    m times the DWM figures
///   Struct {2, 2n + o, 2o}
CostEstimate estimate_cost(std::int64_t n, int splits, std::int64_t o, int experts, Strategy strategy);

}  // namespace tomloom
