#include "teachrl/friction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace teachrl::advice {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw FrictionError("friction spec: " + what);
}

int round_steps(double x) { return static_cast<int>(std::lround(x)); }

}  // namespace

PersistenceBounds persistence_bounds(const FrictionSpec& spec) {
  for (double v : {spec.rate, spec.dt_des, spec.dt_min, spec.dt_max, spec.delta_a, spec.spa_avg,
                   spec.tpa_avg}) {
    require(std::isfinite(v), "all inputs must be finite");
  }
  require(spec.rate > 0.0, "rate U must be positive");
  require(spec.dt_min >= 0.5, "dt_min must be at least 0.5 s");
  require(spec.dt_min <= spec.dt_des, "dt_min must not exceed dt_des");
  require(spec.dt_des <= spec.dt_max, "dt_des must not exceed dt_max");

  PersistenceBounds b;
  b.min = std::max(1, round_steps(spec.dt_min * spec.rate));
  b.max = std::max(b.min, round_steps(spec.dt_max * spec.rate));

  double desired = 0.0;
  switch (spec.basis) {
    case PersistenceBasis::Time:
      desired = spec.dt_des * spec.rate;
      break;
    case PersistenceBasis::ActionSteps:
      require(spec.delta_a >= 1.0, "delta_a must be at least one action");
      require(spec.spa_avg >= 1.0, "spa_avg must be at least one step");
      desired = spec.delta_a * spec.spa_avg;
      break;
    case PersistenceBasis::ActionSeconds:
      require(spec.delta_a >= 1.0, "delta_a must be at least one action");
      require(spec.tpa_avg > 0.0, "tpa_avg must be positive");
      desired = spec.delta_a * spec.tpa_avg * spec.rate;
      break;
  }
  b.desired = std::clamp(round_steps(desired), b.min, b.max);
  return b;
}

int persistence_steps(const FrictionSpec& spec) { return persistence_bounds(spec).desired; }

int persistence_for_rate(double rate, double dt_des) {
  FrictionSpec spec;
  spec.rate = rate;
  spec.dt_des = dt_des;
  spec.dt_max = std::max(spec.dt_max, dt_des);
  return persistence_steps(spec);
}

}  // namespace teachrl::advice
