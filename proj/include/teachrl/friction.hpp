#pragma once

#include <stdexcept>

namespace teachrl::advice {

class FrictionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// How the desired persistence is derived.
enum class PersistenceBasis {
  Time,              // S_des = dt_des * U
  ActionSteps,       // S_des = delta_a * spa_avg
  ActionSeconds,     // S_des = delta_a * tpa_avg * U
};

/// Inputs to the friction calculation. Persistence is measured in time
/// steps; lower friction means advice persists for more steps.
///
/// The bounds always come from the time limits: S_min = dt_min * U and
/// S_max = dt_max * U, with S_min floored at one step.
struct FrictionSpec {
  double rate = 2.0;    // U, domain steps per second
  double dt_des = 2.5;  // seconds between pieces of advice
  double dt_min = 0.5;
  double dt_max = 8.0;
  PersistenceBasis basis = PersistenceBasis::Time;
  double delta_a = 1.0;  // actions between pieces of advice
  double spa_avg = 1.0;  // steps per action; 1 for primitive actions
  double tpa_avg = 0.5;  // seconds per action
};

struct PersistenceBounds {
  int min = 1;
  int desired = 1;
  int max = 1;
};

/// Validates the spec and returns 1 <= min <= desired <= max. Throws
/// FrictionError when the spec cannot satisfy that chain (dt ordering
/// violated, dt_min below half a second, non-positive rate, delta_a < 1,
/// spa_avg < 1, non-finite inputs).
PersistenceBounds persistence_bounds(const FrictionSpec& spec);

/// Number of steps a new piece of advice is followed.
int persistence_steps(const FrictionSpec& spec);

/// Convenience for the common time-based case with default time bounds.
int persistence_for_rate(double rate, double dt_des);

}  // namespace teachrl::advice
