#include "tomloom/strategies.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <regex>

#include "tomloom/complexity.hpp"
#include "tomloom/embedded_templates.hpp"

namespace tomloom {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string join_numbered(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

// Builds turns and issues calls; remembers everything for error reporting.
class Conversation {
 public:
  Conversation(const StrategyConfig& cfg, ChatBackend& backend, std::string strategy)
      : cfg_(cfg), backend_(backend) {
    transcript_.strategy = std::move(strategy);
  }

  void user(std::string text, TurnTag tag) {
    transcript_.turns.push_back({Role::User, std::move(text), tag, transcript_.calls + 1});
  }

  /// Sends every turn since `context_start` and records the reply.
  const std::string& call(TurnTag reply_tag, double temperature, std::size_t context_start = 0,
                          std::optional<std::int64_t> seed = std::nullopt) {
    ChatRequest req;
    req.model_id = cfg_.model_id.empty() ? backend_.model_id() : cfg_.model_id;
    req.messages = to_messages(std::vector<Turn>(transcript_.turns.begin() + static_cast<std::ptrdiff_t>(context_start),
                                                 transcript_.turns.end()));
    req.temperature = temperature;
    req.max_tokens = cfg_.max_tokens;
    req.seed = seed ? seed : cfg_.seed;
    ChatResponse resp;
    try {
      resp = backend_.complete(req);
    } catch (const Error& e) {
      throw StrategyError(e, transcript_);
    }
    ++transcript_.calls;
    transcript_.usage.input_tokens += resp.usage.input_tokens;
    transcript_.usage.output_tokens += resp.usage.output_tokens;
    transcript_.usage.estimated = transcript_.usage.estimated || resp.usage.estimated;
    transcript_.turns.push_back({Role::Model, std::move(resp.text), reply_tag, transcript_.calls});
    return transcript_.turns.back().text;
  }

  std::size_t size() const noexcept { return transcript_.turns.size(); }

  StrategyResult finish() {
    StrategyResult r;
    r.answer = extract_answer(transcript_.turns.back().text);
    r.transcript = std::move(transcript_);
    return r;
  }

 private:
  const StrategyConfig& cfg_;
  ChatBackend& backend_;
  Transcript transcript_;
};

std::map<std::string, std::string> story_vars(const ProblemInstance& p) {
  return {{"story", render_story(p)}, {"question", p.question}, {"choices", render_choices(p)}};
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::DWM: return "dwm";
    case Strategy::CoT: return "cot";
    case Strategy::ToT: return "tot";
    case Strategy::StructJSON: return "json";
    case Strategy::StructYAML: return "yaml";
  }
  return "cot";
}

Strategy parse_strategy(std::string_view name) {
  const auto key = lower(name);
  if (key == "dwm") return Strategy::DWM;
  if (key == "cot") return Strategy::CoT;
  if (key == "tot") return Strategy::ToT;
  if (key == "json" || key == "struct-json" || key == "structjson") return Strategy::StructJSON;
  if (key == "yaml" || key == "struct-yaml" || key == "structyaml") return Strategy::StructYAML;
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(name) + "' (dwm, cot, tot, json, yaml)");
}

StrategyConfig StrategyConfig::dwm(int splits) {
  StrategyConfig c;
  c.strategy = Strategy::DWM;
  c.splits = splits;
  return c;
}

StrategyConfig StrategyConfig::cot() { return StrategyConfig{}; }

StrategyConfig StrategyConfig::tot(int experts) {
  StrategyConfig c;
  c.strategy = Strategy::ToT;
  c.tot_experts = experts;
  c.temperature = 0.7;
  return c;
}

StrategyConfig StrategyConfig::structured(Strategy format) {
  if (format != Strategy::StructJSON && format != Strategy::StructYAML) {
    throw Error(Errc::InvalidArgument, "structured prompting needs json or yaml");
  }
  StrategyConfig c;
  c.strategy = format;
  return c;
}

std::string StrategyConfig::key() const {
  if (strategy == Strategy::DWM) return "dwm-" + std::to_string(splits);
  return std::string(to_string(strategy));
}

void validate(const StrategyConfig& cfg) {
  if (cfg.strategy == Strategy::DWM && (cfg.splits < 1 || cfg.splits > 5)) {
    throw Error(Errc::InvalidArgument, "DWM splits must be within 1..5");
  }
  if (cfg.strategy == Strategy::ToT && cfg.tot_experts < 2) {
    throw Error(Errc::InvalidArgument, "ToT needs at least 2 experts");
  }
  if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0)) {
    throw Error(Errc::InvalidArgument, "temperature must lie in [0, 2]");
  }
  if (cfg.max_tokens < 1) throw Error(Errc::InvalidArgument, "max_tokens must be positive");
}

// --- chunking ---------------------------------------------------------------

std::vector<int> ChunkPlan::sizes() const {
  std::vector<int> out;
  for (const auto& c : chunks) out.push_back(c.size());
  return out;
}

ChunkPlan split_sentences(const ProblemInstance& p, int splits) {
  if (p.sentences.empty()) throw Error(Errc::EmptyProblem, "problem '" + p.id + "' has no sentences");
  if (splits < 1) throw Error(Errc::InvalidArgument, "splits must be >= 1");
  const int n = p.size();
  const int t = std::min(splits, n);
  const int base = n / t;
  const int extra = n % t;
  ChunkPlan plan;
  int next = 1;
  for (int i = 0; i < t; ++i) {
    const int len = base + (i < extra ? 1 : 0);
    plan.chunks.push_back({next, next + len - 1});
    next += len;
  }
  return plan;
}

ChunkPlan split_after(const ProblemInstance& p, const std::vector<int>& cut_after) {
  if (p.sentences.empty()) throw Error(Errc::EmptyProblem, "problem '" + p.id + "' has no sentences");
  ChunkPlan plan;
  int next = 1;
  for (int cut : cut_after) {
    if (cut < next || cut >= p.size()) {
      throw Error(Errc::InvalidArgument, "chunk boundaries must be ascending and inside the story");
    }
    plan.chunks.push_back({next, cut});
    next = cut + 1;
  }
  plan.chunks.push_back({next, p.size()});
  return plan;
}

ChunkPlan split_by_events(const ProblemInstance& p, const AnnotationSet& a) {
  std::vector<int> cuts;
  for (const auto& e : partition(a, a.question_object_id)) {
    if (e.boundary_after_sentence >= 1 && e.boundary_after_sentence < p.size()) {
      cuts.push_back(e.boundary_after_sentence);
    }
  }
  return split_after(p, cuts);
}

// --- transcripts ------------------------------------------------------------

std::string_view to_string(TurnTag t) noexcept {
  switch (t) {
    case TurnTag::PreambleX: return "preamble_x";
    case TurnTag::ChunkP: return "chunk_p";
    case TurnTag::InterleaveW: return "interleave_w";
    case TurnTag::AnswerA: return "answer_a";
    case TurnTag::FinalY: return "final_y";
    case TurnTag::Raw: return "raw";
  }
  return "raw";
}

std::vector<Message> to_messages(const std::vector<Turn>& turns) {
  std::vector<Message> out;
  for (const auto& t : turns) {
    const std::string role = t.role == Role::User ? "user" : "assistant";
    if (!out.empty() && out.back().role == role) {
      out.back().text += "\n\n" + t.text;
    } else {
      out.push_back({role, t.text});
    }
  }
  return out;
}

std::string final_query(const Transcript& t) {
  std::size_t end = 0;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    if (t.turns[i].role == Role::User) end = i + 1;
  }
  std::string out;
  for (std::size_t i = 0; i < end; ++i) {
    if (i) out += "\n\n";
    out += t.turns[i].text;
  }
  return out;
}

bool check_dwm_grammar(const Transcript& t, int splits, bool fused) {
  std::vector<TurnTag> expected{TurnTag::PreambleX};
  for (int i = 1; i <= splits; ++i) {
    expected.push_back(TurnTag::ChunkP);
    expected.push_back(TurnTag::InterleaveW);
    if (i < splits || !fused) expected.push_back(TurnTag::AnswerA);
  }
  expected.push_back(TurnTag::FinalY);
  expected.push_back(TurnTag::AnswerA);
  if (t.turns.size() != expected.size()) return false;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (t.turns[i].tag != expected[i]) return false;
    const bool model_turn = expected[i] == TurnTag::AnswerA;
    if ((t.turns[i].role == Role::Model) != model_turn) return false;
  }
  return true;
}

void to_json(Json& j, const Transcript& t) {
  Json turns = Json::array();
  for (const auto& turn : t.turns) {
    turns.push_back(Json{{"role", turn.role == Role::User ? "user" : "model"},
                         {"text", turn.text},
                         {"tag", to_string(turn.tag)},
                         {"call", turn.call}});
  }
  j = Json{{"strategy", t.strategy},
           {"calls", t.calls},
           {"turns", turns},
           {"usage",
            {{"input_tokens", t.usage.input_tokens},
             {"output_tokens", t.usage.output_tokens},
             {"estimated", t.usage.estimated}}}};
}

// --- answers ----------------------------------------------------------------

ExtractedAnswer extract_answer(std::string_view text) {
  ExtractedAnswer out;
  out.raw = std::string(text);
  const auto folded = lower(text);
  constexpr std::string_view kOpen = "<answer>";
  constexpr std::string_view kClose = "</answer>";
  const auto close = folded.find(kClose);
  if (close != std::string::npos) {
    const auto open = folded.rfind(kOpen, close);
    if (open != std::string::npos) {
      const auto begin = open + kOpen.size();
      out.answer = normalize_answer(text.substr(begin, close - begin));
      out.found_tags = true;
      return out;
    }
  }
  std::string_view rest = text;
  std::string last;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const auto line = trim(rest.substr(0, nl));
    if (!line.empty()) last = line;
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  out.answer = normalize_answer(last);
  return out;
}

// --- templates --------------------------------------------------------------

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet t{
      std::string(template_data::kCot),           std::string(template_data::kTotPropose),
      std::string(template_data::kTotVote),       std::string(template_data::kTotAnswer),
      std::string(template_data::kDwmPreamble),   std::string(template_data::kDwmInterleave),
      std::string(template_data::kDwmQuestion),   std::string(template_data::kStructRepresent),
      std::string(template_data::kStructAnswer),
  };
  return t;
}

TemplateSet TemplateSet::load(const std::string& dir) {
  TemplateSet t = builtin();
  const std::pair<const char*, std::string*> fields[] = {
      {"cot", &t.cot},
      {"tot_propose", &t.tot_propose},
      {"tot_vote", &t.tot_vote},
      {"tot_answer", &t.tot_answer},
      {"dwm_preamble", &t.dwm_preamble},
      {"dwm_interleave", &t.dwm_interleave},
      {"dwm_question", &t.dwm_question},
      {"struct_represent", &t.struct_represent},
      {"struct_answer", &t.struct_answer},
  };
  for (const auto& [name, field] : fields) {
    const auto path = std::filesystem::path(dir) / (std::string(name) + ".txt");
    if (std::filesystem::exists(path)) *field = read_file(path.string());
  }
  return t;
}

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i++]);
  }
  return out;
}

std::string render_choices(const ProblemInstance& p) {
  if (!p.multiple_choice()) return {};
  std::string out = "\nChoices:";
  for (std::size_t i = 0; i < p.choices->size(); ++i) {
    out += "\n";
    out.push_back(static_cast<char>('A' + i));
    out += ". " + (*p.choices)[i];
  }
  return out;
}

// --- runs -------------------------------------------------------------------

StrategyResult dwm_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                       const TemplateSet& templates, const std::optional<ChunkPlan>& plan) {
  if (cfg.strategy != Strategy::DWM) throw Error(Errc::InvalidArgument, "dwm_run needs a DWM config");
  validate(cfg);
  const ChunkPlan chunks = plan ? *plan : split_sentences(p, cfg.splits);
  const auto vars = story_vars(p);
  const int t_count = chunks.effective_splits();

  Conversation conv(cfg, backend, cfg.key());
  conv.user(templates.dwm_preamble, TurnTag::PreambleX);
  for (int t = 0; t < t_count; ++t) {
    const auto& c = chunks.chunks[static_cast<std::size_t>(t)];
    conv.user(render_story(p, c.first, c.last), TurnTag::ChunkP);
    conv.user(templates.dwm_interleave, TurnTag::InterleaveW);
    if (cfg.fuse_final && t + 1 == t_count) break;
    conv.call(TurnTag::AnswerA, cfg.temperature);
  }
  conv.user(render_template(templates.dwm_question, vars), TurnTag::FinalY);
  conv.call(TurnTag::AnswerA, cfg.temperature);
  return conv.finish();
}

StrategyResult cot_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                       const TemplateSet& templates) {
  validate(cfg);
  Conversation conv(cfg, backend, cfg.key());
  conv.user(render_template(templates.cot, story_vars(p)), TurnTag::Raw);
  conv.call(TurnTag::AnswerA, cfg.temperature);
  return conv.finish();
}

StrategyResult tot_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                       const TemplateSet& templates) {
  if (cfg.strategy != Strategy::ToT) throw Error(Errc::InvalidArgument, "tot_run needs a ToT config");
  validate(cfg);
  auto vars = story_vars(p);
  Conversation conv(cfg, backend, cfg.key());

  // Stage 1: propose.
  auto start = conv.size();
  conv.user(render_template(templates.tot_propose, vars), TurnTag::Raw);
  const auto candidates = parse_candidates(conv.call(TurnTag::Raw, cfg.temperature, start));

  // Stage 2: m independent voters.
  vars["observations"] = candidates.empty() ? std::string{} : "\n" + join_numbered(candidates, "\n");
  const auto vote_prompt = render_template(templates.tot_vote, vars);
  std::vector<std::optional<int>> votes;
  for (int v = 0; v < cfg.tot_experts; ++v) {
    start = conv.size();
    conv.user(vote_prompt, TurnTag::Raw);
    std::optional<std::int64_t> seed;
    if (cfg.seed) seed = *cfg.seed + v;
    votes.push_back(parse_vote(conv.call(TurnTag::Raw, cfg.temperature, start, seed),
                               static_cast<int>(candidates.size())));
  }

  // Stage 3: answer with the winning observation, or all of them when no vote parsed.
  std::vector<std::string> shown = candidates;
  if (const auto winner = tally_votes(votes)) shown = {candidates[static_cast<std::size_t>(*winner - 1)]};
  vars["observations"] = shown.empty() ? std::string{} : join_numbered(shown, "\n") + "\n";
  start = conv.size();
  conv.user(render_template(templates.tot_answer, vars), TurnTag::Raw);
  conv.call(TurnTag::AnswerA, cfg.temperature, start);
  return conv.finish();
}

StrategyResult struct_run(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                          const TemplateSet& templates) {
  if (cfg.strategy != Strategy::StructJSON && cfg.strategy != Strategy::StructYAML) {
    throw Error(Errc::InvalidArgument, "struct_run needs a json or yaml config");
  }
  validate(cfg);
  auto vars = story_vars(p);
  vars["format"] = cfg.strategy == Strategy::StructJSON ? "JSON" : "YAML";
  Conversation conv(cfg, backend, cfg.key());
  conv.user(render_template(templates.struct_represent, vars), TurnTag::Raw);
  conv.call(TurnTag::Raw, cfg.temperature);
  conv.user(render_template(templates.struct_answer, vars), TurnTag::Raw);
  conv.call(TurnTag::AnswerA, cfg.temperature);
  return conv.finish();
}

StrategyResult run_strategy(const ProblemInstance& p, const StrategyConfig& cfg, ChatBackend& backend,
                            const TemplateSet& templates) {
  switch (cfg.strategy) {
    case Strategy::DWM: return dwm_run(p, cfg, backend, templates);
    case Strategy::CoT: return cot_run(p, cfg, backend, templates);
    case Strategy::ToT: return tot_run(p, cfg, backend, templates);
    case Strategy::StructJSON:
    case Strategy::StructYAML: return struct_run(p, cfg, backend, templates);
  }
  throw Error(Errc::InvalidArgument, "unknown strategy");
}

std::vector<std::string> parse_candidates(std::string_view text) {
  static const std::regex marker(R"(^\s*(?:[-*]|\d+[.):])\s*)");
  std::vector<std::string> out;
  std::string_view rest = text;
  while (!rest.empty() && out.size() < 8) {
    const auto nl = rest.find('\n');
    auto line = trim(rest.substr(0, nl));
    line = trim(std::regex_replace(line, marker, "", std::regex_constants::format_first_only));
    if (!line.empty()) out.push_back(line);
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  return out;
}

std::optional<int> parse_vote(std::string_view text, int n_candidates) {
  static const std::regex vote(R"(the best choice is\s*\{*\s*(\d+))", std::regex::icase);
  std::optional<int> last;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), vote); it != std::sregex_iterator(); ++it) {
    try {
      last = std::stoi((*it)[1].str());
    } catch (const std::exception&) {
      last.reset();
    }
  }
  if (!last || *last < 1 || *last > n_candidates) return std::nullopt;
  return last;
}

std::optional<int> tally_votes(const std::vector<std::optional<int>>& votes) {
  std::map<int, int> counts;
  for (const auto& v : votes) {
    if (v) ++counts[*v];
  }
  std::optional<int> best;
  int best_count = 0;
  for (const auto& [id, count] : counts) {  // ascending id: ties keep the lowest
    if (count > best_count) {
      best = id;
      best_count = count;
    }
  }
  return best;
}

// --- cost -------------------------------------------------------------------

CostEstimate estimate_cost(std::int64_t n, int splits, std::int64_t o, int experts, Strategy strategy) {
  if (n < 0 || o < 0 || splits < 1) throw Error(Errc::InvalidArgument, "cost needs n, o >= 0 and T >= 1");
  auto dwm = [&] {
    CostEstimate c{splits, 0, splits * o};
    for (std::int64_t t = 1; t <= splits; ++t) c.input_tokens += t * n / splits + (t - 1) * o;
    return c;
  };
  switch (strategy) {
    case Strategy::CoT: return {1, n, o};
    case Strategy::DWM: return dwm();
    case Strategy::ToT: {
      if (experts < 1) throw Error(Errc::InvalidArgument, "ToT cost needs m >= 1");
      auto c = dwm();
      return {c.calls * experts, c.input_tokens * experts, c.output_tokens * experts};
    }
    case Strategy::StructJSON:
    case Strategy::StructYAML: return {2, 2 * n + o, 2 * o};
  }
  return {};
}

}  // namespace tomloom
