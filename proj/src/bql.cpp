#include "teachrl/bql.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace teachrl::bql {

namespace {
constexpr const char* kMagic = "teachrl-qtable";
constexpr int kFormatVersion = 1;
}  // namespace

NormalGamma observe(const NormalGamma& post, double x) {
  NormalGamma next;
  const double innovation = x - post.mu;
  next.mu = (post.lambda * post.mu + x) / (post.lambda + 1.0);
  next.lambda = post.lambda + 1.0;
  next.alpha = post.alpha + 0.5;
  next.beta = post.beta + post.lambda * innovation * innovation / (2.0 * (post.lambda + 1.0));
  return next;
}

QTable::QTable(int num_states, double discount, NormalGamma prior)
    : num_states_(num_states), discount_(discount), prior_(prior) {
  if (num_states <= 0) throw std::invalid_argument("QTable needs at least one state");
  if (!prior.valid()) {
    throw std::invalid_argument("QTable prior violates lambda > 0, alpha > 0.5, beta > 0");
  }
  if (!(discount >= 0.0 && discount <= 1.0)) {
    throw std::invalid_argument("discount must lie in [0, 1]");
  }
  cells_.assign(static_cast<std::size_t>(num_states) * world::kNumActions, prior_);
}

double QTable::max_mean(int state) const {
  double best = at(state, MoveAction::Up).mu;
  for (auto a : world::kAllActions) best = std::max(best, at(state, a).mu);
  return best;
}

void QTable::reset() { std::fill(cells_.begin(), cells_.end(), prior_); }

void update(QTable& q, int state, MoveAction action, double reward, int next_state,
            bool terminal) {
  if (!std::isfinite(reward)) throw std::invalid_argument("reward must be finite");
  const double target = terminal ? reward : reward + q.discount() * q.max_mean(next_state);
  q.at(state, action) = observe(q.at(state, action), target);
}

MoveAction greedy_action(const QTable& q, int state) {
  MoveAction best = MoveAction::Up;
  for (auto a : world::kAllActions) {
    if (q.at(state, a).mu > q.at(state, best).mu) best = a;
  }
  return best;
}

std::vector<MoveAction> greedy_policy(const QTable& q) {
  std::vector<MoveAction> policy(static_cast<std::size_t>(q.num_states()));
  for (int s = 0; s < q.num_states(); ++s) policy[static_cast<std::size_t>(s)] = greedy_action(q, s);
  return policy;
}

void QTable::save(std::ostream& out) const {
  auto old_precision = out.precision(17);
  out << kMagic << " " << kFormatVersion << "\n";
  out << "states " << num_states_ << " discount " << discount_ << " prior " << prior_.mu << " "
      << prior_.lambda << " " << prior_.alpha << " " << prior_.beta << "\n";
  for (int s = 0; s < num_states_; ++s) {
    for (auto a : world::kAllActions) {
      const auto& c = at(s, a);
      out << s << " " << world::action_name(a) << " " << c.mu << " " << c.lambda << " " << c.alpha
          << " " << c.beta << "\n";
    }
  }
  out.precision(old_precision);
}

QTable QTable::load(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) {
    throw std::runtime_error("not a q-table file");
  }
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported q-table version " + std::to_string(version));
  }
  std::string k_states, k_discount, k_prior;
  int states = 0;
  double discount = 0.0;
  NormalGamma prior;
  if (!(in >> k_states >> states >> k_discount >> discount >> k_prior >> prior.mu >> prior.lambda >>
        prior.alpha >> prior.beta) ||
      k_states != "states" || k_discount != "discount" || k_prior != "prior") {
    throw std::runtime_error("malformed q-table header");
  }
  QTable table(states, discount, prior);
  int s = 0;
  std::string action;
  NormalGamma cell;
  while (in >> s >> action >> cell.mu >> cell.lambda >> cell.alpha >> cell.beta) {
    auto a = world::action_from_name(action);
    if (!a || s < 0 || s >= states) {
      throw std::runtime_error("bad q-table row for state " + std::to_string(s));
    }
    if (!cell.valid()) throw std::runtime_error("q-table row violates posterior invariants");
    table.at(s, *a) = cell;
  }
  if (!in.eof()) throw std::runtime_error("trailing garbage in q-table");
  return table;
}

}  // namespace teachrl::bql
