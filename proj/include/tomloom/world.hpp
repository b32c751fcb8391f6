#pragma once

// Synthetic Sally-Anne / ToMi-style stories backed by an exact world and
// belief state machine. The replayed trace is the ground truth for partitions,
// gold answers and complexity fixtures.
//
// Belief rules (one room, opaque containers):
//  - a belief chain [A, B, ...] takes the object's new location whenever every
//    agent in the chain is present when the object is placed or moved;
//  - otherwise it keeps its last observed value (frozen, not an event);
//  - entering a room never updates a belief;
//  - with `exit_counts_as_event`, an agent's exit marks each belief it owns as
//    stale when the believed value changes before the agent returns.

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tomloom/core.hpp"

namespace tomloom::world {

struct Enter {
  std::string agent;
  std::string room;
};
struct Exit {
  std::string agent;
  std::string room;
};
struct Place {
  std::string object;
  std::string container;
};
struct Move {
  std::string agent;
  std::string object;
  std::string from;
  std::string to;
};
struct Distractor {
  std::string agent;
  std::string attitude;  // hates, likes, ...
  std::string object;
};

using WorldAction = std::variant<Enter, Exit, Place, Move, Distractor>;

/// The sentence an action contributes to the story.
std::string render_action(const WorldAction& action);

struct WorldParams {
  int n_agents = 2;
  int n_distractors = 0;
  int n_moves = 1;
  int k_max = 1;
  bool exit_counts_as_event = false;
};

/// What a question asks for: the object's location (empty chain) or a
/// belief about it held by owner_chain[0] about owner_chain[1] ...
struct Question {
  std::vector<std::string> owner_chain;
  std::string object;

  std::string object_id() const;
  std::string text() const;

  friend bool operator==(const Question&, const Question&) = default;
};

std::string physical_object_id(const std::string& object);
std::string belief_object_id(const std::vector<std::string>& owner_chain, const std::string& object);

struct WorldTrace {
  std::string problem_id;
  std::vector<std::string> agents;
  std::string room;
  std::string object;  // the first placed object
  std::vector<std::string> story_objects;
  std::vector<WorldAction> actions;
  std::vector<TrackedObject> objects;
  /// states[t][object_id]: rendered value after t actions; states[0] is all ⊥.
  std::vector<std::map<std::string, std::string>> states;
  /// answers[t][object_id]: the bare location (or ⊥) the object/belief points at.
  std::vector<std::map<std::string, std::string>> answers;
  Question question;
};

/// Runs the state machine over `actions`. The story object, agents and room are
/// taken from the actions; beliefs are tracked up to order `k_max`.
WorldTrace replay(const std::vector<WorldAction>& actions, const WorldParams& params);

struct GeneratedStory {
  ProblemInstance problem;
  WorldTrace trace;
};

/// Deterministic for a fixed (seed, params). Throws Error{InfeasibleParams}.
GeneratedStory generate(std::uint64_t seed, const WorldParams& params);

/// Marks every sentence t at which states[t-1][obj] != states[t][obj].
AnnotationSet derive_annotation(const WorldTrace& trace);

/// Final location the questioned object or belief points at.
/// Throws Error{UnknownQuestion} when the trace does not track it.
std::string gold_answer(const WorldTrace& trace, const Question& question);

/// (e_t, p_<=t) for every time step of one object.
std::vector<StateDescription> state_descriptions(const WorldTrace& trace, const std::string& object_id);

}  // namespace tomloom::world
