#include "teachrl/newtonian.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace teachrl::advice {

AdviceDictionary::AdviceDictionary(int num_states)
    : entries_(static_cast<std::size_t>(std::max(0, num_states))) {}

void AdviceDictionary::check(int state) const {
  if (state < 0 || state >= num_states()) {
    throw std::out_of_range("advice state index " + std::to_string(state) + " out of range");
  }
}

std::optional<MoveAction> AdviceDictionary::get(int state) const {
  check(state);
  return entries_[static_cast<std::size_t>(state)];
}

void AdviceDictionary::set(int state, MoveAction action) {
  check(state);
  entries_[static_cast<std::size_t>(state)] = action;
}

bool AdviceDictionary::set_if_absent(int state, MoveAction action) {
  check(state);
  auto& slot = entries_[static_cast<std::size_t>(state)];
  if (slot) return false;
  slot = action;
  return true;
}

void AdviceDictionary::erase(int state) {
  check(state);
  entries_[static_cast<std::size_t>(state)].reset();
}

void AdviceDictionary::clear() {
  for (auto& e : entries_) e.reset();
}

std::size_t AdviceDictionary::size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.has_value();
  return n;
}

void AdviceDictionary::save(std::ostream& out) const {
  out << "# state action\n";
  for (int s = 0; s < num_states(); ++s) {
    if (auto a = entries_[static_cast<std::size_t>(s)]) out << s << " " << world::action_name(*a) << "\n";
  }
}

AdviceDictionary AdviceDictionary::load(std::istream& in, int num_states) {
  AdviceDictionary dict(num_states);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    int state = 0;
    std::string name;
    if (!(row >> state)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::runtime_error("advice table line " + std::to_string(line_no) + ": expected state index");
    }
    std::string extra;
    if (!(row >> name) || (row >> extra)) {
      throw std::runtime_error("advice table line " + std::to_string(line_no) +
                               ": expected 'state action'");
    }
    auto action = world::action_from_name(name);
    if (!action) {
      throw std::runtime_error("advice table line " + std::to_string(line_no) + ": unknown action '" +
                               name + "'");
    }
    if (state < 0 || state >= num_states) {
      throw std::runtime_error("advice table line " + std::to_string(line_no) + ": state " +
                               std::to_string(state) + " out of range");
    }
    dict.set(state, *action);
  }
  return dict;
}

NewtonianAgent::NewtonianAgent(int num_states, NewtonianConfig config)
    : config_(config), dictionary_(num_states) {
  set_persist_for(config.persist_for);
  if (!(config.dictionary_epsilon >= 0.0 && config.dictionary_epsilon <= 1.0)) {
    throw std::invalid_argument("dictionary_epsilon must lie in [0, 1]");
  }
}

void NewtonianAgent::set_persist_for(int steps) {
  if (steps < 1) throw std::invalid_argument("persist_for must be at least 1 step");
  config_.persist_for = steps;
  persistence_.persist_for = steps;
  persistence_.times_followed = std::min(persistence_.times_followed, steps);
}

void NewtonianAgent::new_advice(int state, MoveAction advice) {
  persistence_.advice_just_given = true;
  persistence_.advised_action = advice;
  persistence_.times_followed = 0;
  dictionary_.set(state, advice);
}

MoveAction NewtonianAgent::select_action(int state, const bql::QTable& q, AgentRng& rng) {
  if (persistence_.advice_just_given) {
    const MoveAction chosen = *persistence_.advised_action;
    dictionary_.set_if_absent(state, chosen);
    if (++persistence_.times_followed >= persistence_.persist_for) {
      persistence_.advice_just_given = false;
      persistence_.times_followed = 0;
    }
    last_source_ = ActionSource::Advice;
    return chosen;
  }
  if (auto advised = dictionary_.get(state)) {
    if (config_.dictionary_epsilon == 0.0 || uniform01(rng) >= config_.dictionary_epsilon) {
      last_source_ = ActionSource::Dictionary;
      return *advised;
    }
  }
  last_source_ = ActionSource::Learner;
  return bql::select_action(q, state, rng);
}

void NewtonianAgent::end_episode() {
  persistence_.advice_just_given = false;
  persistence_.advised_action.reset();
  persistence_.times_followed = 0;
}

std::optional<MoveAction> NewtonianAgent::persisted_action() const {
  if (!persistence_.advice_just_given) return std::nullopt;
  return persistence_.advised_action;
}

}  // namespace teachrl::advice
