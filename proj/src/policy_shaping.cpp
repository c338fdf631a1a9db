#include "teachrl/policy_shaping.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace teachrl::shaping {

double feedback_probability(int delta, double consistency) {
  if (!(consistency > 0.5 && consistency < 1.0)) {
    throw std::invalid_argument("consistency must lie strictly between 0.5 and 1");
  }
  if (delta == 0) return 0.5;
  // Dividing through by C^delta keeps both tails finite for large |delta|.
  const double ratio = std::pow((1.0 - consistency) / consistency, delta);
  return 1.0 / (1.0 + ratio);
}

CritiqueLedger::CritiqueLedger(int num_states, double consistency)
    : num_states_(num_states), consistency_(consistency) {
  if (num_states <= 0) throw std::invalid_argument("ledger needs at least one state");
  if (!(consistency > 0.5 && consistency < 1.0)) {
    throw std::invalid_argument("consistency must lie strictly between 0.5 and 1");
  }
  deltas_.assign(static_cast<std::size_t>(num_states) * world::kNumActions, 0);
}

std::size_t CritiqueLedger::slot(int state, MoveAction a) const {
  if (state < 0 || state >= num_states_) {
    throw std::out_of_range("critique state index " + std::to_string(state) + " out of range");
  }
  return static_cast<std::size_t>(state) * world::kNumActions +
         static_cast<std::size_t>(world::action_index(a));
}

void CritiqueLedger::record(int state, MoveAction action, CritiqueSign sign) {
  deltas_[slot(state, action)] += sign == CritiqueSign::Positive ? 1 : -1;
}

int CritiqueLedger::delta(int state, MoveAction action) const { return deltas_[slot(state, action)]; }

double CritiqueLedger::feedback_prob(int state, MoveAction action) const {
  return feedback_probability(delta(state, action), consistency_);
}

bool CritiqueLedger::uninformative(int state) const {
  const int first = delta(state, MoveAction::Up);
  for (auto a : world::kAllActions) {
    if (delta(state, a) != first) return false;
  }
  return true;
}

void CritiqueLedger::clear() { std::fill(deltas_.begin(), deltas_.end(), 0); }

void CritiqueLedger::save(std::ostream& out) const {
  out << "# state action delta\n";
  for (int s = 0; s < num_states_; ++s) {
    for (auto a : world::kAllActions) {
      if (int d = delta(s, a); d != 0) out << s << " " << world::action_name(a) << " " << d << "\n";
    }
  }
}

std::array<double, world::kNumActions> combine(const std::array<double, world::kNumActions>& learner,
                                               const CritiqueLedger& ledger, int state) {
  std::array<double, world::kNumActions> product{};
  double total = 0.0;
  for (auto a : world::kAllActions) {
    const int i = world::action_index(a);
    product[i] = learner[i] * ledger.feedback_prob(state, a);
    total += product[i];
  }
  if (total <= 0.0) return learner;
  for (auto& p : product) p /= total;
  return product;
}

MoveAction select_action_shaped(const CritiqueLedger& ledger, const bql::QTable& q, int state,
                                AgentRng& rng, int samples) {
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  if (ledger.uninformative(state)) return bql::select_action(q, state, rng);

  std::array<double, world::kNumActions> learner{};
  for (int i = 0; i < samples; ++i) {
    learner[world::action_index(bql::select_action(q, state, rng))] += 1.0;
  }
  for (auto& p : learner) p /= samples;

  const auto dist = combine(learner, ledger, state);
  double u = uniform01(rng);
  for (int i = 0; i < world::kNumActions; ++i) {
    if (u < dist[i]) return world::action_from_index(i);
    u -= dist[i];
  }
  // Rounding left u just above the cumulative mass; take the last supported action.
  for (int i = world::kNumActions - 1; i >= 0; --i) {
    if (dist[i] > 0.0) return world::action_from_index(i);
  }
  return world::action_from_index(world::kNumActions - 1);
}

}  // namespace teachrl::shaping
