#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "teachrl/bql.hpp"
#include "teachrl/random.hpp"
#include "teachrl/world.hpp"

namespace teachrl::advice {

using world::MoveAction;

/// Latest advised action per state index. Also the on-disk advice table:
/// one `state_index action` row per entry, `#` comments allowed.
class AdviceDictionary {
 public:
  explicit AdviceDictionary(int num_states = 0);

  std::optional<MoveAction> get(int state) const;
  bool contains(int state) const { return get(state).has_value(); }
  void set(int state, MoveAction action);
  /// Writes only when `state` has no entry yet. Returns whether it wrote.
  bool set_if_absent(int state, MoveAction action);
  void erase(int state);
  void clear();

  int num_states() const { return static_cast<int>(entries_.size()); }
  std::size_t size() const;

  void save(std::ostream& out) const;
  /// Throws std::runtime_error on malformed rows or out-of-range states.
  static AdviceDictionary load(std::istream& in, int num_states);

  friend bool operator==(const AdviceDictionary&, const AdviceDictionary&) = default;

 private:
  void check(int state) const;
  std::vector<std::optional<MoveAction>> entries_;
};

/// The follow-through counter armed by new advice.
struct Persistence {
  bool advice_just_given = false;
  std::optional<MoveAction> advised_action;
  int times_followed = 0;
  int persist_for = 1;
};

enum class ActionSource { Advice, Dictionary, Learner };

struct NewtonianConfig {
  int persist_for = 1;
  // Probability of deferring to the learner on a dictionary hit. Zero means
  // dictionary advice is always followed.
  double dictionary_epsilon = 0.0;
};

/// Newtonian Action Advice on top of a Bayesian Q-learner. New advice is
/// followed immediately for `persist_for` selections; states visited while
/// it persists inherit it unless they already hold advice. Afterwards the
/// dictionary is followed wherever it has an entry, and the learner decides
/// everywhere else.
class NewtonianAgent {
 public:
  NewtonianAgent(int num_states, NewtonianConfig config);

  void new_advice(int state, MoveAction advice);
  MoveAction select_action(int state, const bql::QTable& q, AgentRng& rng);

  /// Clears the persistence window; the dictionary survives.
  void end_episode();

  /// The action currently being forced, if the persistence window is open.
  std::optional<MoveAction> persisted_action() const;
  ActionSource last_source() const { return last_source_; }

  void set_persist_for(int steps);
  const NewtonianConfig& config() const { return config_; }
  const Persistence& persistence() const { return persistence_; }
  const AdviceDictionary& dictionary() const { return dictionary_; }
  AdviceDictionary& dictionary() { return dictionary_; }

 private:
  NewtonianConfig config_;
  AdviceDictionary dictionary_;
  Persistence persistence_;
  ActionSource last_source_ = ActionSource::Learner;
};

}  // namespace teachrl::advice
