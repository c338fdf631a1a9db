#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "teachrl/random.hpp"
#include "teachrl/world.hpp"

namespace teachrl::bql {

using world::MoveAction;

// Normal-gamma belief over one Q-value: precision tau ~ Gamma(alpha, rate beta),
// Q | tau ~ Normal(mu, 1 / (lambda * tau)).
struct NormalGamma {
  double mu = 0.0;
  double lambda = 1.0;
  double alpha = 2.0;
  double beta = 1.0;

  bool valid() const {
    return std::isfinite(mu) && std::isfinite(lambda) && std::isfinite(alpha) &&
           std::isfinite(beta) && lambda > 0.0 && alpha > 0.5 && beta > 0.0;
  }

  friend bool operator==(const NormalGamma&, const NormalGamma&) = default;
};

/// Single-observation conjugate update toward target x.
NormalGamma observe(const NormalGamma& post, double x);

/// Dense table of beliefs, one per (state index, action), all starting at the prior.
class QTable {
 public:
  QTable(int num_states, double discount, NormalGamma prior = {});

  const NormalGamma& at(int state, MoveAction a) const { return cells_[slot(state, a)]; }
  NormalGamma& at(int state, MoveAction a) { return cells_[slot(state, a)]; }

  int num_states() const { return num_states_; }
  double discount() const { return discount_; }
  const NormalGamma& prior() const { return prior_; }

  /// Largest posterior mean over actions at `state`.
  double max_mean(int state) const;
  /// Every cell back to the prior.
  void reset();

  void save(std::ostream& out) const;
  static QTable load(std::istream& in);

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t slot(int state, MoveAction a) const {
    return static_cast<std::size_t>(state) * world::kNumActions +
           static_cast<std::size_t>(world::action_index(a));
  }

  int num_states_;
  double discount_;
  NormalGamma prior_;
  std::vector<NormalGamma> cells_;
};

template <class Urbg>
double sample_q(const NormalGamma& post, Urbg& rng) {
  std::gamma_distribution<double> precision(post.alpha, 1.0 / post.beta);
  const double tau = precision(rng);
  std::normal_distribution<double> z(0.0, 1.0);
  return post.mu + z(rng) / std::sqrt(post.lambda * tau);
}

/// Q-value sampling: one draw per action, argmax, exact ties broken uniformly.
template <class Urbg>
MoveAction select_action(const QTable& q, int state, Urbg& rng) {
  double best = -std::numeric_limits<double>::infinity();
  int best_index = 0;
  int ties = 0;
  std::array<double, world::kNumActions> draws{};
  for (auto a : world::kAllActions) {
    double v = sample_q(q.at(state, a), rng);
    draws[world::action_index(a)] = v;
    if (v > best) {
      best = v;
      best_index = world::action_index(a);
      ties = 1;
    } else if (v == best) {
      ++ties;
    }
  }
  if (ties > 1) {
    int pick = std::uniform_int_distribution<int>(0, ties - 1)(rng);
    for (int i = 0; i < world::kNumActions; ++i) {
      if (draws[i] == best && pick-- == 0) return world::action_from_index(i);
    }
  }
  return world::action_from_index(best_index);
}

/// One Bayesian Q-learning backup. The target is reward + discount * max mean
/// at next_state, or just reward when terminal. Throws std::invalid_argument
/// for a non-finite reward.
void update(QTable& q, int state, MoveAction action, double reward, int next_state, bool terminal);

/// Posterior-mean argmax per state; ties resolve to the earliest of Up, Down, Left, Right.
std::vector<MoveAction> greedy_policy(const QTable& q);
MoveAction greedy_action(const QTable& q, int state);

}  // namespace teachrl::bql
