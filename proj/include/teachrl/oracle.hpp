#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "teachrl/newtonian.hpp"
#include "teachrl/policy_shaping.hpp"
#include "teachrl/random.hpp"
#include "teachrl/world.hpp"

namespace teachrl::oracle {

using world::MoveAction;

enum class Trigger { Probabilistic, OnStateEntry };
enum class OracleMode { Advice, Critique };

struct TeacherScript {
  advice::AdviceDictionary advice_map;
  Trigger trigger = Trigger::Probabilistic;
};

struct OracleConfig {
  double p_advice = 1.0;
  TeacherScript script;
  OracleMode mode = OracleMode::Advice;
  std::uint64_t seed = 0;
};

void validate(const OracleConfig& config);

/// Draws d from (0, 1] and reports whether the teacher speaks this step
/// (d <= p_advice). Exactly one draw per call.
template <class Urbg>
bool delivery_gate(const OracleConfig& config, Urbg& rng) {
  const double d = 1.0 - uniform01(rng);
  return d <= config.p_advice;
}

/// Gate keyed by (run seed, episode, step) so delivery never depends on the
/// agent's own random stream.
inline CounterRng gate_rng(const OracleConfig& config, std::uint64_t run_seed, int episode, int step) {
  return CounterRng(run_seed ^ mix64(config.seed), static_cast<std::uint64_t>(episode),
                    static_cast<std::uint64_t>(step));
}

template <class Urbg>
std::optional<MoveAction> maybe_advise(const OracleConfig& config, int state, Urbg& rng) {
  if (!delivery_gate(config, rng)) return std::nullopt;
  return config.script.advice_map.get(state);
}

/// Converts the advice map into critique of the action just taken: positive
/// when it matches the advice, negative otherwise, nothing when the gate
/// stays closed or the state has no advice.
template <class Urbg>
std::optional<shaping::CritiqueSign> critique_for(const OracleConfig& config, int state,
                                                  MoveAction action, Urbg& rng) {
  if (!delivery_gate(config, rng)) return std::nullopt;
  auto advised = config.script.advice_map.get(state);
  if (!advised) return std::nullopt;
  return *advised == action ? shaping::CritiqueSign::Positive : shaping::CritiqueSign::Negative;
}

/// On-state-entry delivery for minimal-advice scripts. Each state speaks at
/// most once per episode, on its first entry, and only when its scripted
/// action differs from what the agent is already being pushed to do.
class ScriptedTeacher {
 public:
  explicit ScriptedTeacher(const TeacherScript& script);

  void begin_episode();
  std::optional<MoveAction> scripted_advise(int state, std::optional<MoveAction> persisted);

 private:
  TeacherScript script_;
  std::vector<bool> visited_;
};

/// Advice for every (cell, carrying) state: the first move of a shortest path
/// to the current goal (the person, or the exit once carrying) that stays out
/// of world::keep_out_cells(). Ties prefer Right, Down, Left, Up. States with
/// no route, and the finished state, have no entry.
TeacherScript build_full_advice_map(const world::Layout& layout);

/// The two-piece "down, then right" script along the shortest route.
TeacherScript direct_path_script(const world::Layout& layout);
/// The four-piece "right, down, left, right" script around the radiation.
TeacherScript avoid_path_script(const world::Layout& layout);

}  // namespace teachrl::oracle
