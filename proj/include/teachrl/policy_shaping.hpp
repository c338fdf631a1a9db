#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "teachrl/bql.hpp"
#include "teachrl/random.hpp"
#include "teachrl/world.hpp"

namespace teachrl::shaping {

using world::MoveAction;

enum class CritiqueSign { Positive, Negative };

/// Probability that an action is optimal given net feedback `delta` from a
/// teacher who is right with probability `consistency`:
///   C^delta / (C^delta + (1 - C)^delta)
double feedback_probability(int delta, double consistency);

/// Net critique count per (state, action).
class CritiqueLedger {
 public:
  CritiqueLedger(int num_states, double consistency = 0.95);

  void record(int state, MoveAction action, CritiqueSign sign);
  int delta(int state, MoveAction action) const;
  double feedback_prob(int state, MoveAction action) const;
  /// True when every action at `state` carries the same delta, i.e. the
  /// feedback term cannot change the learner's distribution there.
  bool uninformative(int state) const;

  double consistency() const { return consistency_; }
  int num_states() const { return num_states_; }
  void clear();

  /// Rows `state_index action delta` for every nonzero delta.
  void save(std::ostream& out) const;

 private:
  std::size_t slot(int state, MoveAction a) const;

  int num_states_;
  double consistency_;
  std::vector<int> deltas_;
};

struct ShapingConfig {
  double consistency = 0.95;
  int samples = 50;  // Q-sampling trials used to estimate the learner's policy
};

/// Combines the learner's action distribution (estimated from `samples`
/// Q-sampling argmax trials) with the feedback probabilities, renormalizes and
/// samples. If the product vanishes everywhere the learner's estimate is used
/// alone. Where the ledger is uninformative the combined distribution equals
/// the learner's, so one direct Q-sampling draw is taken instead.
MoveAction select_action_shaped(const CritiqueLedger& ledger, const bql::QTable& q, int state,
                                AgentRng& rng, int samples);

/// The normalized product distribution for a given learner estimate. Exposed
/// for inspection; returns the estimate itself on a vanishing product.
std::array<double, world::kNumActions> combine(const std::array<double, world::kNumActions>& learner,
                                               const CritiqueLedger& ledger, int state);

}  // namespace teachrl::shaping
