#include "tomloom/world.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "tomloom/embedded_vocab.hpp"
#include "tomloom/rng.hpp"

namespace tomloom::world {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

struct Vocabulary {
  std::vector<std::string> agents = lines_of(vocab_data::kAgents);
  std::vector<std::string> rooms = lines_of(vocab_data::kRooms);
  std::vector<std::string> objects = lines_of(vocab_data::kObjects);
  std::vector<std::string> containers = lines_of(vocab_data::kContainers);
  std::vector<std::string> distractors = lines_of(vocab_data::kDistractors);
  std::vector<std::string> attitudes = lines_of(vocab_data::kAttitudes);
};

const Vocabulary& vocabulary() {
  static const Vocabulary v;
  return v;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string belief_label(const std::vector<std::string>& chain, const std::string& object) {
  std::string out;
  for (const auto& agent : chain) out += agent + "'s belief of ";
  return out + "the " + object + "'s location";
}

// Every ordered chain of distinct agents with length 1..k_max.
std::vector<std::vector<std::string>> belief_chains(const std::vector<std::string>& agents, int k_max) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::vector<std::string>> frontier{{}};
  for (int order = 1; order <= k_max; ++order) {
    std::vector<std::vector<std::string>> next;
    for (const auto& chain : frontier) {
      for (const auto& a : agents) {
        if (std::find(chain.begin(), chain.end(), a) != chain.end()) continue;
        auto longer = chain;
        longer.push_back(a);
        next.push_back(longer);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

struct Cell {
  std::string object;
  std::vector<std::string> chain;  // empty: the physical location
};

}  // namespace

std::string render_action(const WorldAction& action) {
  return std::visit(Overloaded{
                        [](const Enter& a) { return a.agent + " entered the " + a.room + "."; },
                        [](const Exit& a) { return a.agent + " exited the " + a.room + "."; },
                        [](const Place& a) { return "The " + a.object + " is in the " + a.container + "."; },
                        [](const Move& a) { return a.agent + " moved the " + a.object + " to the " + a.to + "."; },
                        // ToMi leaves these unpunctuated.
                        [](const Distractor& a) { return a.agent + " " + a.attitude + " the " + a.object; },
                    },
                    action);
}

std::string physical_object_id(const std::string& object) { return object; }

std::string belief_object_id(const std::vector<std::string>& owner_chain, const std::string& object) {
  return "belief(" + join(owner_chain, ">") + "):" + object;
}

std::string Question::object_id() const {
  return owner_chain.empty() ? physical_object_id(object) : belief_object_id(owner_chain, object);
}

std::string Question::text() const {
  switch (owner_chain.size()) {
    case 0: return "Where is the " + object + " really?";
    case 1: return "Where will " + owner_chain[0] + " look for the " + object + "?";
    default: {
      std::string out = "Where does " + owner_chain[0] + " think that ";
      for (std::size_t i = 1; i + 1 < owner_chain.size(); ++i) out += owner_chain[i] + " thinks that ";
      return out + owner_chain.back() + " searches for the " + object + "?";
    }
  }
}

WorldTrace replay(const std::vector<WorldAction>& actions, const WorldParams& params) {
  if (params.k_max < 0 || params.k_max > 2) {
    throw Error(Errc::InfeasibleParams, "k_max must be 0, 1 or 2");
  }
  WorldTrace trace;
  trace.actions = actions;

  std::vector<std::string> story_objects;
  std::vector<std::pair<std::string, std::string>> facts;  // object, agent
  auto note_agent = [&](const std::string& a) {
    if (std::find(trace.agents.begin(), trace.agents.end(), a) == trace.agents.end()) trace.agents.push_back(a);
  };
  auto note_object = [&](const std::string& o) {
    if (std::find(story_objects.begin(), story_objects.end(), o) == story_objects.end()) story_objects.push_back(o);
  };
  for (const auto& action : actions) {
    std::visit(Overloaded{
                   [&](const Enter& a) {
                     note_agent(a.agent);
                     if (trace.room.empty()) trace.room = a.room;
                   },
                   [&](const Exit& a) { note_agent(a.agent); },
                   [&](const Place& a) { note_object(a.object); },
                   [&](const Move& a) {
                     note_agent(a.agent);
                     note_object(a.object);
                   },
                   [&](const Distractor& a) {
                     note_agent(a.agent);
                     facts.emplace_back(a.object, a.agent);
                   },
               },
               action);
  }
  if (!story_objects.empty()) trace.object = story_objects.front();
  trace.story_objects = story_objects;
  for (const auto& [fact, agent] : facts) {
    if (std::find(story_objects.begin(), story_objects.end(), fact) != story_objects.end()) {
      throw Error(Errc::InfeasibleParams, "distractor object '" + fact + "' is also a story object");
    }
  }

  const auto chains = belief_chains(trace.agents, params.k_max);
  std::vector<std::pair<std::string, Cell>> cells;  // object_id -> cell
  std::set<std::string> declared;
  for (const auto& obj : story_objects) {
    cells.push_back({physical_object_id(obj), Cell{obj, {}}});
    trace.objects.push_back({physical_object_id(obj), ObjectKind::Physical, 0, {}, "location of the " + obj});
    for (const auto& chain : chains) {
      const auto id = belief_object_id(chain, obj);
      cells.push_back({id, Cell{obj, chain}});
      trace.objects.push_back(
          {id, ObjectKind::Belief, static_cast<int>(chain.size()), chain, belief_label(chain, obj)});
    }
  }
  for (const auto& [fact, agent] : facts) {
    if (!declared.insert(fact).second) continue;
    trace.objects.push_back({fact, ObjectKind::Physical, 0, {}, "distractor " + fact});
  }

  const std::size_t n = actions.size();
  const std::string bottom(kBottom);

  // Pass 1: locations and observed beliefs.
  std::map<std::string, std::string> answer;
  for (const auto& o : trace.objects) answer[o.object_id] = bottom;
  std::vector<std::map<std::string, std::string>> answers{answer};
  std::vector<std::set<std::string>> observed_at(n + 1);  // cells updated by observation at step t
  std::map<std::string, std::string> fact_value;
  std::vector<std::map<std::string, std::string>> facts_at{fact_value};

  std::set<std::string> present;
  for (std::size_t t = 1; t <= n; ++t) {
    const auto& action = actions[t - 1];
    auto relocate = [&](const std::string& obj, const std::string& container) {
      answer[physical_object_id(obj)] = container;
      for (const auto& [id, cell] : cells) {
        if (cell.object != obj || cell.chain.empty()) continue;
        const bool all_present = std::all_of(cell.chain.begin(), cell.chain.end(),
                                             [&](const std::string& a) { return present.contains(a); });
        if (all_present) {
          answer[id] = container;
          observed_at[t].insert(id);
        }
      }
    };
    std::visit(Overloaded{
                   [&](const Enter& a) { present.insert(a.agent); },
                   [&](const Exit& a) {
                     if (!present.erase(a.agent)) {
                       throw Error(Errc::InfeasibleParams, a.agent + " exits without having entered");
                     }
                   },
                   [&](const Place& a) { relocate(a.object, a.container); },
                   [&](const Move& a) {
                     if (!present.contains(a.agent)) {
                       throw Error(Errc::InfeasibleParams, a.agent + " moves an object while absent");
                     }
                     relocate(a.object, a.to);
                   },
                   [&](const Distractor& a) { fact_value[a.object] = a.attitude + "(" + a.agent + ", " + a.object + ")"; },
               },
               action);
    answers.push_back(answer);
    facts_at.push_back(fact_value);
  }

  // Pass 2: staleness markers (exit followed by an unseen change of what the belief models).
  std::vector<std::set<std::string>> stale_at(n + 1);
  if (params.exit_counts_as_event) {
    for (std::size_t t = 1; t <= n; ++t) {
      const auto* exit = std::get_if<Exit>(&actions[t - 1]);
      if (exit == nullptr) continue;
      std::size_t back = n + 1;
      for (std::size_t s = t + 1; s <= n; ++s) {
        if (const auto* e = std::get_if<Enter>(&actions[s - 1]); e && e->agent == exit->agent) {
          back = s;
          break;
        }
      }
      for (const auto& [id, cell] : cells) {
        if (cell.chain.empty() || cell.chain.front() != exit->agent) continue;
        const std::vector<std::string> rest(cell.chain.begin() + 1, cell.chain.end());
        const auto referent = rest.empty() ? physical_object_id(cell.object) : belief_object_id(rest, cell.object);
        bool changes = false;
        for (std::size_t s = t + 1; s < back && s <= n; ++s) {
          if (answers[s].at(referent) != answers[t].at(referent)) {
            changes = true;
            break;
          }
        }
        if (!changes) continue;
        for (std::size_t s = t; s <= n; ++s) {
          if (s > t && observed_at[s].contains(id)) break;
          stale_at[s].insert(id);
        }
      }
    }
  }

  trace.answers = answers;
  trace.states.resize(n + 1);
  for (std::size_t t = 0; t <= n; ++t) {
    auto& state = trace.states[t];
    for (const auto& [id, cell] : cells) {
      const auto& where = answers[t].at(id);
      if (where == bottom) {
        state[id] = bottom;
      } else if (cell.chain.empty()) {
        state[id] = "in(" + cell.object + ", " + where + ")";
      } else {
        state[id] = render_belief(cell.chain, cell.object, stale_at[t].contains(id) ? where + ", stale" : where);
      }
    }
    for (const auto& obj : trace.objects) {
      if (state.contains(obj.object_id)) continue;
      auto it = facts_at[t].find(obj.object_id);
      state[obj.object_id] = it == facts_at[t].end() ? bottom : it->second;
      trace.answers[t][obj.object_id] = state[obj.object_id];
    }
  }
  if (!story_objects.empty()) trace.question = Question{{}, trace.object};
  return trace;
}

GeneratedStory generate(std::uint64_t seed, const WorldParams& params) {
  const auto& vocab = vocabulary();
  if (params.n_agents < 2) throw Error(Errc::InfeasibleParams, "need at least 2 agents");
  if (params.n_moves < 1) throw Error(Errc::InfeasibleParams, "need at least 1 move");
  if (params.k_max < 0 || params.k_max > 2) throw Error(Errc::InfeasibleParams, "k_max must be 0, 1 or 2");
  if (params.n_distractors < 0) throw Error(Errc::InfeasibleParams, "negative distractor count");
  if (static_cast<std::size_t>(params.n_agents) > vocab.agents.size()) {
    throw Error(Errc::InfeasibleParams, "at most " + std::to_string(vocab.agents.size()) + " agents available");
  }
  if (static_cast<std::size_t>(params.n_distractors) > vocab.distractors.size()) {
    throw Error(Errc::InfeasibleParams,
                "at most " + std::to_string(vocab.distractors.size()) + " distractors available");
  }

  Rng rng(seed);
  std::vector<std::string> agents;
  for (auto i : rng.sample_indices(vocab.agents.size(), static_cast<std::size_t>(params.n_agents))) {
    agents.push_back(vocab.agents[i]);
  }
  rng.shuffle(agents);
  const std::string room = rng.pick(vocab.rooms);
  const std::string object = rng.pick(vocab.objects);
  std::string where = rng.pick(vocab.containers);

  std::vector<WorldAction> actions;
  for (const auto& a : agents) actions.push_back(Enter{a, room});
  actions.push_back(Place{object, where});

  std::vector<std::string> present = agents;
  auto random_present_except = [&](const std::string& keep) {
    std::vector<std::string> pool;
    for (const auto& a : present) {
      if (a != keep) pool.push_back(a);
    }
    return pool.empty() ? std::string{} : rng.pick(pool);
  };
  auto leave = [&](const std::string& agent) {
    actions.push_back(Exit{agent, room});
    present.erase(std::find(present.begin(), present.end(), agent));
  };

  for (int i = 0; i < params.n_moves; ++i) {
    const auto mover = rng.pick(present);
    // The first move always happens behind someone's back.
    if (i == 0 || (present.size() >= 2 && rng.coin())) {
      const auto leaver = random_present_except(mover);
      if (!leaver.empty()) leave(leaver);
    }
    std::vector<std::string> targets;
    for (const auto& c : vocab.containers) {
      if (c != where) targets.push_back(c);
    }
    const auto to = rng.pick(targets);
    actions.push_back(Move{mover, object, where, to});
    where = to;
    // Whoever missed a move stays out until the epilogue.
  }
  if (present.size() >= 2 && rng.coin()) {
    const auto leaver = rng.pick(present);
    leave(leaver);
    if (rng.coin()) {
      actions.push_back(Enter{leaver, room});
      present.push_back(leaver);
    }
  }

  std::vector<std::string> distractor_objects;
  for (auto i : rng.sample_indices(vocab.distractors.size(), static_cast<std::size_t>(params.n_distractors))) {
    distractor_objects.push_back(vocab.distractors[i]);
  }
  rng.shuffle(distractor_objects);
  for (const auto& d : distractor_objects) {
    const auto pos = static_cast<std::size_t>(params.n_agents) +
                     rng.below(actions.size() - static_cast<std::size_t>(params.n_agents) + 1);
    actions.insert(actions.begin() + static_cast<std::ptrdiff_t>(pos),
                   Distractor{rng.pick(agents), rng.pick(vocab.attitudes), d});
  }

  GeneratedStory out;
  out.trace = replay(actions, params);

  std::vector<Question> askable{Question{{}, object}};
  for (const auto& o : out.trace.objects) {
    if (o.kind == ObjectKind::Belief) askable.push_back(Question{o.owner_chain, object});
  }
  out.trace.question = rng.pick(askable);
  out.trace.problem_id = "synthetic-" + std::to_string(seed);

  auto& p = out.problem;
  p.id = out.trace.problem_id;
  p.benchmark = Benchmark::Synthetic;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    p.sentences.push_back({static_cast<int>(i) + 1, render_action(actions[i])});
  }
  p.question = out.trace.question.text();
  p.gold_answer = gold_answer(out.trace, out.trace.question);
  p.metadata = {{"seed", std::to_string(seed)},
                {"n_agents", std::to_string(params.n_agents)},
                {"n_distractors", std::to_string(params.n_distractors)},
                {"n_moves", std::to_string(params.n_moves)},
                {"k_max", std::to_string(params.k_max)},
                {"exit_counts_as_event", params.exit_counts_as_event ? "true" : "false"},
                {"question_object_id", out.trace.question.object_id()}};
  return out;
}

AnnotationSet derive_annotation(const WorldTrace& trace) {
  AnnotationSet a;
  a.problem_id = trace.problem_id;
  a.objects = trace.objects;
  a.question_object_id = trace.question.object_id();
  for (const auto& o : trace.objects) {
    for (std::size_t t = 1; t < trace.states.size(); ++t) {
      if (trace.states[t - 1].at(o.object_id) != trace.states[t].at(o.object_id)) {
        a.events.push_back({o.object_id, static_cast<int>(t)});
      }
    }
  }
  return a;
}

std::string gold_answer(const WorldTrace& trace, const Question& question) {
  const auto id = question.object_id();
  const auto& last = trace.answers.back();
  auto it = last.find(id);
  const bool story_object = std::find(trace.story_objects.begin(), trace.story_objects.end(), question.object) !=
                            trace.story_objects.end();
  if (it == last.end() || !story_object) {
    throw Error(Errc::UnknownQuestion, "trace does not track '" + id + "'");
  }
  return it->second;
}

std::vector<StateDescription> state_descriptions(const WorldTrace& trace, const std::string& object_id) {
  std::vector<StateDescription> out;
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    auto it = trace.states[t].find(object_id);
    if (it == trace.states[t].end()) throw Error(Errc::UnknownObject, "no tracked object '" + object_id + "'");
    out.push_back({object_id, static_cast<int>(t), it->second, static_cast<int>(t)});
  }
  return out;
}

}  // namespace tomloom::world
